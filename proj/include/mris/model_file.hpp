#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mris/probes.hpp"

namespace mris {

using json = nlohmann::json;

// Schema violation, located by a JSON pointer into the model file.
class SchemaError : public Error {
 public:
  SchemaError(std::string pointer, const std::string& message)
      : Error(pointer + ": " + message), pointer_(std::move(pointer)) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

struct AdiabaticSpec {
  RMat p_end;
  std::string form = "linear";
};

struct ModelFile {
  ModelConfig config;
  std::optional<AdiabaticSpec> adiabatic;
};

namespace io {

inline std::string child(const std::string& ptr, const std::string& key) {
  std::string esc;
  for (char c : key) {
    if (c == '~')
      esc += "~0";
    else if (c == '/')
      esc += "~1";
    else
      esc += c;
  }
  return ptr + "/" + esc;
}
inline std::string child(const std::string& ptr, std::size_t i) { return ptr + "/" + std::to_string(i); }

inline const json& require(const json& obj, const std::string& ptr, const std::string& key) {
  if (!obj.is_object()) throw SchemaError(ptr, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(child(ptr, key), "missing required field");
  return *it;
}

inline double number(const json& j, const std::string& ptr) {
  if (!j.is_number()) throw SchemaError(ptr, "expected a number");
  return j.get<double>();
}

// A complex entry is [re, im]; a bare number is read as real.
inline cplx complex_entry(const json& j, const std::string& ptr) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  throw SchemaError(ptr, "expected a complex entry [re, im]");
}

inline Mat complex_matrix(const json& j, const std::string& ptr, int rows = -1) {
  if (!j.is_array() || j.empty()) throw SchemaError(ptr, "expected a non-empty array of rows");
  const auto n = static_cast<int>(j.size());
  if (rows >= 0 && n != rows) throw SchemaError(ptr, "expected " + std::to_string(rows) + " rows, got " + std::to_string(n));
  Mat m(n, n);
  for (int i = 0; i < n; ++i) {
    const json& row = j[i];
    const std::string rp = child(ptr, i);
    if (!row.is_array() || static_cast<int>(row.size()) != n) throw SchemaError(rp, "expected a row of length " + std::to_string(n));
    for (int k = 0; k < n; ++k) m(i, k) = complex_entry(row[k], child(rp, k));
  }
  return m;
}

inline RMat real_matrix(const json& j, const std::string& ptr, int n) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) throw SchemaError(ptr, "expected " + std::to_string(n) + " rows");
  RMat m(n, n);
  for (int i = 0; i < n; ++i) {
    const std::string rp = child(ptr, i);
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != n) throw SchemaError(rp, "expected a row of length " + std::to_string(n));
    for (int k = 0; k < n; ++k) m(i, k) = number(j[i][k], child(rp, k));
  }
  return m;
}

inline void check_stochastic(const RMat& p, const std::string& ptr) {
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const std::string rp = child(ptr, static_cast<std::size_t>(i));
    if (p.row(i).minCoeff() < 0.0) throw SchemaError(rp, "negative transition probability");
    const double s = p.row(i).sum();
    if (std::abs(s - 1.0) > 1e-12) {
      std::ostringstream os;
      os << "row sums to " << s << ", expected 1";
      throw SchemaError(rp, os.str());
    }
  }
}

template <class T, class F>
T at_pointer(const std::string& ptr, F&& make) {
  try {
    return make();
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(ptr, e.what());
  }
}

inline json complex_matrix_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back({m(i, k).real(), m(i, k).imag()});
    rows.push_back(row);
  }
  return rows;
}

inline json real_matrix_json(const RMat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(row);
  }
  return rows;
}

inline json real_vector_json(const RVec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace io

inline ModelFile parse_model(const json& root) {
  using namespace io;
  const std::string top;
  if (!root.is_object()) throw SchemaError("", "model file must be a JSON object");
  const json& ver = require(root, top, "schema_version");
  if (!ver.is_number_integer() || ver.get<int>() != 1) throw SchemaError("/schema_version", "unsupported schema version");

  ModelFile out;
  ModelConfig& cfg = out.config;
  if (const auto it = root.find("tolerances"); it != root.end()) {
    if (!it->is_object()) throw SchemaError("/tolerances", "expected an object");
    for (const auto& [k, v] : it->items()) {
      const std::string p = child("/tolerances", k);
      if (!cfg.tol.set(k, number(v, p))) throw SchemaError(p, "unknown tolerance");
    }
  }

  const json& sys = require(root, top, "system");
  const json& dim_j = require(sys, "/system", "dim");
  if (!dim_j.is_number_integer() || dim_j.get<int>() < 1) throw SchemaError("/system/dim", "expected a positive integer");
  const int d = dim_j.get<int>();
  cfg.h_sys = at_pointer<Observable>("/system/H_S", [&] {
    return Observable(complex_matrix(require(sys, "/system", "H_S"), "/system/H_S", d), cfg.tol);
  });

  const json& omega = require(root, top, "omega");
  if (!omega.is_array() || omega.empty()) throw SchemaError("/omega", "expected a non-empty array of labels");
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < omega.size(); ++i) {
    if (!omega[i].is_string()) throw SchemaError(child("/omega", i), "expected a string label");
    const std::string l = omega[i].get<std::string>();
    if (std::find(labels.begin(), labels.end(), l) != labels.end()) throw SchemaError(child("/omega", i), "duplicate label");
    labels.push_back(l);
  }
  const int n = static_cast<int>(labels.size());

  const json& probes = require(root, top, "probes");
  for (const auto& l : labels) {
    const std::string pp = child("/probes", l);
    const json& pj = require(probes, "/probes", l);
    ProbeSpec spec;
    const Mat he = complex_matrix(require(pj, pp, "H_E"), child(pp, "H_E"));
    spec.h_env = at_pointer<Observable>(child(pp, "H_E"), [&] { return Observable(he, cfg.tol); });
    spec.beta = number(require(pj, pp, "beta"), child(pp, "beta"));
    if (!(spec.beta >= 0.0)) throw SchemaError(child(pp, "beta"), "beta must be >= 0");
    spec.tau = number(require(pj, pp, "tau"), child(pp, "tau"));
    if (!(spec.tau > 0.0)) throw SchemaError(child(pp, "tau"), "tau must be > 0");
    const int de = static_cast<int>(he.rows());
    spec.coupling = at_pointer<Observable>(child(pp, "V"), [&] {
      return Observable(complex_matrix(require(pj, pp, "V"), child(pp, "V"), d * de), cfg.tol);
    });
    cfg.probes.push_back(std::move(spec));
  }

  const json& chain = require(root, top, "chain");
  const json& pi_j = require(chain, "/chain", "pi");
  if (!pi_j.is_array() || static_cast<int>(pi_j.size()) != n)
    throw SchemaError("/chain/pi", "expected " + std::to_string(n) + " entries");
  RVec pi(n);
  for (int i = 0; i < n; ++i) pi(i) = number(pi_j[i], child("/chain/pi", i));
  if (pi.minCoeff() < 0.0 || std::abs(pi.sum() - 1.0) > 1e-12) throw SchemaError("/chain/pi", "not a probability vector");
  const RMat p = real_matrix(require(chain, "/chain", "P"), "/chain/P", n);
  check_stochastic(p, "/chain/P");
  cfg.chain = at_pointer<MarkovChain>("/chain", [&] { return MarkovChain(labels, pi, p); });

  const json& init = require(root, top, "initial_states");
  for (const auto& l : labels) {
    const std::string ip = child("/initial_states", l);
    cfg.rho_init.push_back(at_pointer<DensityMatrix>(ip, [&] {
      return DensityMatrix(complex_matrix(require(init, "/initial_states", l), ip, d), cfg.tol);
    }));
  }

  if (const auto it = root.find("tri"); it != root.end()) {
    TimeReversalData t;
    t.w_sys = complex_matrix(require(*it, "/tri", "W_S"), "/tri/W_S", d);
    const json& we = require(*it, "/tri", "W_E");
    for (int w = 0; w < n; ++w) {
      const std::string wp = child("/tri/W_E", labels[w]);
      t.w_env.push_back(complex_matrix(require(we, "/tri/W_E", labels[w]), wp, cfg.probes[w].h_env.dim()));
    }
    cfg.tri = std::move(t);
  }

  if (const auto it = root.find("adiabatic"); it != root.end()) {
    AdiabaticSpec a;
    a.p_end = real_matrix(require(*it, "/adiabatic", "P_end"), "/adiabatic/P_end", n);
    check_stochastic(a.p_end, "/adiabatic/P_end");
    if (const auto f = it->find("form"); f != it->end()) {
      if (!f->is_string() || (*f != "linear" && *f != "smoothstep"))
        throw SchemaError("/adiabatic/form", "expected \"linear\" or \"smoothstep\"");
      a.form = f->get<std::string>();
    }
    out.adiabatic = std::move(a);
  }
  return out;
}

inline ModelFile load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file '" + path + "'");
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
  return parse_model(root);
}

inline json model_to_json(const ModelConfig& cfg, const std::optional<AdiabaticSpec>& adiabatic = std::nullopt) {
  using namespace io;
  const auto& labels = cfg.chain.labels();
  json root;
  root["schema_version"] = 1;
  root["system"] = {{"dim", cfg.h_sys.dim()}, {"H_S", complex_matrix_json(cfg.h_sys.matrix())}};
  root["omega"] = labels;
  json probes = json::object(), init = json::object();
  for (std::size_t w = 0; w < labels.size(); ++w) {
    const auto& p = cfg.probes[w];
    probes[labels[w]] = {{"H_E", complex_matrix_json(p.h_env.matrix())},
                         {"beta", p.beta},
                         {"tau", p.tau},
                         {"V", complex_matrix_json(p.coupling.matrix())}};
    init[labels[w]] = complex_matrix_json(cfg.rho_init[w].matrix());
  }
  root["probes"] = probes;
  root["chain"] = {{"pi", real_vector_json(cfg.chain.pi())}, {"P", real_matrix_json(cfg.chain.P())}};
  root["initial_states"] = init;
  if (cfg.tri) {
    json we = json::object();
    for (std::size_t w = 0; w < labels.size(); ++w) we[labels[w]] = complex_matrix_json(cfg.tri->w_env[w]);
    root["tri"] = {{"W_S", complex_matrix_json(cfg.tri->w_sys)}, {"W_E", we}};
  }
  if (adiabatic) root["adiabatic"] = {{"P_end", real_matrix_json(adiabatic->p_end)}, {"form", adiabatic->form}};
  return root;
}

inline json extended_state_json(const MarkovChain& chain, const BlockFamily& r) {
  json out = json::object();
  for (int w = 0; w < chain.size(); ++w) out[chain.labels()[w]] = io::complex_matrix_json(r.blocks[w]);
  return out;
}

}  // namespace mris
