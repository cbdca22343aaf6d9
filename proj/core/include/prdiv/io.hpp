#pragma once

#include <string>

#include "prdiv/density.hpp"
#include "prdiv/grid.hpp"

namespace prdiv {

// Density config schema:
//   {"kind": "gaussian_mixture_1d" | "gaussian_mixture_2d" | "discrete",
//    "components": [{"weight": w, "mean": [..], "cov": [[..],[..]] | v}, ...],
//    "probs": [..]}                       (discrete)
Density density_from_json(const std::string& json_text);
std::string density_to_json(const Density& d);

// Grid config schema (all fields optional; defaults sized from densities):
//   {"bounds": [[lo, hi], ...], "nodes_per_axis": n,
//    "rule": "trapezoid" | "gauss_legendre"}
QuadratureGrid grid_from_json(const std::string& json_text, const Density& p, const Density& q);
std::string grid_to_json(const QuadratureGrid& g);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);
// FNV-1a content hash, hex; embedded in emitted CSV/JSON for replays
std::string content_hash_hex(const std::string& content);

}  // namespace prdiv
