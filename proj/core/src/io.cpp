#include "prdiv/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "prdiv/rng.hpp"

namespace prdiv {

namespace {

Density::Component component_from_json(const nlohmann::json& j, int dim) {
  Density::Component c;
  c.weight = j.at("weight").get<double>();
  const auto& mean = j.at("mean");
  c.mean[0] = mean[0].get<double>();
  if (dim == 2) c.mean[1] = mean[1].get<double>();
  const auto& cov = j.at("cov");
  if (dim == 1) {
    c.cov[0] = cov.is_array() ? cov[0].get<double>() : cov.get<double>();
  } else {
    c.cov = {cov[0][0].get<double>(), cov[0][1].get<double>(), cov[1][0].get<double>(),
             cov[1][1].get<double>()};
  }
  return c;
}

}  // namespace

Density density_from_json(const std::string& json_text) {
  const nlohmann::json j = nlohmann::json::parse(json_text);
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "discrete") return Density::discrete(j.at("probs").get<std::vector<double>>());
  const int dim = kind == "gaussian_mixture_1d" ? 1 : 2;
  if (kind != "gaussian_mixture_1d" && kind != "gaussian_mixture_2d")
    throw std::invalid_argument("density config: unknown kind '" + kind + "'");
  std::vector<Density::Component> comps;
  for (const auto& cj : j.at("components")) comps.push_back(component_from_json(cj, dim));
  return dim == 1 ? Density::mixture1d(std::move(comps)) : Density::mixture2d(std::move(comps));
}

std::string density_to_json(const Density& d) {
  nlohmann::json j;
  if (d.is_discrete()) {
    j["kind"] = "discrete";
    j["probs"] = d.probs();
    return j.dump(2);
  }
  j["kind"] = d.dim() == 1 ? "gaussian_mixture_1d" : "gaussian_mixture_2d";
  j["components"] = nlohmann::json::array();
  for (const auto& c : d.components()) {
    nlohmann::json cj;
    cj["weight"] = c.weight;
    if (d.dim() == 1) {
      cj["mean"] = {c.mean[0]};
      cj["cov"] = {c.cov[0]};
    } else {
      cj["mean"] = {c.mean[0], c.mean[1]};
      cj["cov"] = {{c.cov[0], c.cov[1]}, {c.cov[2], c.cov[3]}};
    }
    j["components"].push_back(cj);
  }
  return j.dump(2);
}

QuadratureGrid grid_from_json(const std::string& json_text, const Density& p, const Density& q) {
  QuadratureGrid g = QuadratureGrid::for_pair(p, q);
  if (json_text.empty()) return g;
  const nlohmann::json j = nlohmann::json::parse(json_text);
  if (j.contains("nodes_per_axis")) {
    g = QuadratureGrid::for_pair(p, q, j["nodes_per_axis"].get<int>());
  }
  if (j.contains("bounds")) {
    const auto& b = j["bounds"];
    for (int a = 0; a < g.dim && a < static_cast<int>(b.size()); ++a) {
      g.lo[a] = b[a][0].get<double>();
      g.hi[a] = b[a][1].get<double>();
    }
  }
  if (j.contains("rule")) {
    const std::string r = j["rule"].get<std::string>();
    if (r == "trapezoid") {
      g.rule = QuadratureGrid::Rule::Trapezoid;
    } else if (r == "gauss_legendre") {
      g.rule = QuadratureGrid::Rule::GaussLegendre;
    } else {
      throw std::invalid_argument("grid config: unknown rule '" + r + "'");
    }
  }
  return g;
}

std::string grid_to_json(const QuadratureGrid& g) {
  nlohmann::json j;
  j["nodes_per_axis"] = g.nodes_per_axis;
  j["rule"] = g.rule == QuadratureGrid::Rule::Trapezoid ? "trapezoid" : "gauss_legendre";
  j["bounds"] = nlohmann::json::array();
  for (int a = 0; a < g.dim; ++a) j["bounds"].push_back({g.lo[a], g.hi[a]});
  return j.dump();
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << content;
}

std::string content_hash_hex(const std::string& content) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(content)));
  return buf;
}

}  // namespace prdiv
