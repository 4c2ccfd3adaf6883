#include "micqp/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace micqp {

using nlohmann::json;

namespace {

bool same_shape_and_values(const Eigen::MatrixXd& l, const Eigen::MatrixXd& r) {
  if (l.rows() != r.rows() || l.cols() != r.cols()) return false;
  for (Eigen::Index i = 0; i < l.rows(); ++i)
    for (Eigen::Index j = 0; j < l.cols(); ++j)
      if (!(l(i, j) == r(i, j))) return false;
  return true;
}

bool same_vector(const Eigen::VectorXd& l, const Eigen::VectorXd& r) {
  if (l.size() != r.size()) return false;
  for (Eigen::Index i = 0; i < l.size(); ++i)
    if (!(l[i] == r[i])) return false;
  return true;
}

double parse_number(const json& v, const std::string& field) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  throw ParseError("field '" + field + "': expected a number or \"inf\"/\"-inf\"");
}

json number_to_json(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return json(v);
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw ParseError(where + ": missing field '" + key + "'");
  return *it;
}

Eigen::VectorXd parse_vector(const json& v, const std::string& field) {
  if (!v.is_array()) throw ParseError("field '" + field + "': expected an array");
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = parse_number(v[i], field);
  return out;
}

Eigen::MatrixXd parse_matrix(const json& v, Eigen::Index cols, const std::string& field) {
  if (!v.is_array()) throw ParseError("field '" + field + "': expected an array of rows");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(v.size()), cols);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const json& row = v[i];
    if (!row.is_array())
      throw ParseError("field '" + field + "': row " + std::to_string(i) + " is not an array");
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw DimensionError("field '" + field + "': row " + std::to_string(i) + " has " +
                           std::to_string(row.size()) + " entries, expected " +
                           std::to_string(cols));
    for (std::size_t j = 0; j < row.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = parse_number(row[j], field);
  }
  return out;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(number_to_json(v[i]));
  return arr;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number_to_json(m(i, j)));
    arr.push_back(std::move(row));
  }
  return arr;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw ParseError(where + ": unknown field '" + it.key() + "'");
}

void require_finite(const Eigen::MatrixXd& m, const std::string& field) {
  if (!m.allFinite()) throw DomainError("field '" + field + "': non-finite entry");
}

}  // namespace

bool operator==(const ConeBlock& l, const ConeBlock& r) {
  return same_shape_and_values(l.A, r.A) && same_vector(l.b, r.b) &&
         same_vector(l.a, r.a) && l.b0 == r.b0;
}

bool operator==(const MicqpInstance& l, const MicqpInstance& r) {
  return l.n == r.n && same_vector(l.c, r.c) && same_shape_and_values(l.E, r.E) &&
         same_vector(l.h, r.h) && l.cones == r.cones && l.int_vars == r.int_vars &&
         same_vector(l.lb, r.lb) && same_vector(l.ub, r.ub) &&
         l.minimize_input == r.minimize_input && l.meta == r.meta;
}

bool MicqpInstance::is_integer(int j) const {
  return std::binary_search(int_vars.begin(), int_vars.end(), j);
}

void MicqpInstance::validate() const {
  if (n < 0) throw DimensionError("field 'n': negative");
  if (c.size() != n) throw DimensionError("field 'c': length " + std::to_string(c.size()) + " != n");
  if (E.cols() != n && E.rows() > 0) throw DimensionError("field 'E': column count != n");
  if (h.size() != E.rows()) throw DimensionError("field 'h': length != rows(E)");
  if (lb.size() != n) throw DimensionError("field 'lb': length != n");
  if (ub.size() != n) throw DimensionError("field 'ub': length != n");
  require_finite(c, "c");
  require_finite(E, "E");
  require_finite(h, "h");
  for (int j = 0; j < n; ++j) {
    if (std::isnan(lb[j]) || std::isnan(ub[j])) throw DomainError("field 'lb'/'ub': NaN bound");
    if (lb[j] > ub[j])
      throw DomainError("field 'lb': lb[" + std::to_string(j) + "] > ub[" + std::to_string(j) + "]");
  }
  for (std::size_t k = 0; k < int_vars.size(); ++k) {
    if (int_vars[k] < 0 || int_vars[k] >= n)
      throw DimensionError("field 'int_vars': index " + std::to_string(int_vars[k]) + " out of range");
    if (k > 0 && int_vars[k] <= int_vars[k - 1])
      throw DomainError("field 'int_vars': not strictly increasing");
  }
  for (std::size_t l = 0; l < cones.size(); ++l) {
    const auto& cb = cones[l];
    const std::string w = "cones[" + std::to_string(l) + "]";
    if (cb.A.rows() < 1) throw DimensionError("field '" + w + ".A': needs at least one row");
    if (cb.A.cols() != n) throw DimensionError("field '" + w + ".A': column count != n");
    if (cb.b.size() != cb.A.rows()) throw DimensionError("field '" + w + ".b': length != rows(A)");
    if (cb.a.size() != n) throw DimensionError("field '" + w + ".a': length != n");
    require_finite(cb.A, w + ".A");
    require_finite(cb.b, w + ".b");
    require_finite(cb.a, w + ".a");
    if (!std::isfinite(cb.b0)) throw DomainError("field '" + w + ".b0': non-finite");
  }
}

MicqpInstance make_instance(int n) {
  MicqpInstance inst;
  inst.n = n;
  inst.c = Eigen::VectorXd::Zero(n);
  inst.E = Eigen::MatrixXd::Zero(0, n);
  inst.h = Eigen::VectorXd::Zero(0);
  inst.lb = Eigen::VectorXd::Constant(n, -kInf);
  inst.ub = Eigen::VectorXd::Constant(n, kInf);
  return inst;
}

void add_row(MicqpInstance& inst, const Eigen::VectorXd& coeffs, double rhs) {
  if (coeffs.size() != inst.n) throw DimensionError("add_row: coefficient length != n");
  const auto m = inst.E.rows();
  inst.E.conservativeResize(m + 1, inst.n);
  inst.E.row(m) = coeffs.transpose();
  inst.h.conservativeResize(m + 1);
  inst.h[m] = rhs;
}

int add_var(MicqpInstance& inst, double lb, double ub, double obj, bool integer) {
  const int j = inst.n++;
  inst.c.conservativeResize(inst.n);
  inst.c[j] = obj;
  inst.lb.conservativeResize(inst.n);
  inst.lb[j] = lb;
  inst.ub.conservativeResize(inst.n);
  inst.ub[j] = ub;
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(inst.E.rows(), inst.n);
  E.leftCols(j) = inst.E;
  inst.E = std::move(E);
  for (auto& cb : inst.cones) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(cb.A.rows(), inst.n);
    A.leftCols(j) = cb.A;
    cb.A = std::move(A);
    cb.a.conservativeResize(inst.n);
    cb.a[j] = 0.0;
  }
  if (integer) inst.int_vars.push_back(j);  // j is the largest index so order holds
  return j;
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::Unbounded: return "Unbounded";
    case SolveStatus::TimeLimit: return "TimeLimit";
    case SolveStatus::IterLimit: return "IterLimit";
  }
  return "?";
}

SolveStatus status_from_string(const std::string& s) {
  for (auto st : {SolveStatus::Optimal, SolveStatus::Infeasible, SolveStatus::Unbounded,
                  SolveStatus::TimeLimit, SolveStatus::IterLimit})
    if (s == to_string(st)) return st;
  throw ParseError("unknown status '" + s + "'");
}

MicqpInstance parse_instance(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("instance: top level must be an object");
  reject_unknown(doc, {"n", "maximize", "c", "E", "h", "cones", "int_vars", "lb", "ub", "meta"},
                 "instance");

  MicqpInstance inst;
  const json& jn = require(doc, "n", "instance");
  if (!jn.is_number_integer()) throw ParseError("field 'n': expected an integer");
  inst.n = jn.get<int>();
  if (inst.n < 0) throw DimensionError("field 'n': negative");

  const json& jmax = require(doc, "maximize", "instance");
  if (!jmax.is_boolean()) throw ParseError("field 'maximize': expected a boolean");
  inst.minimize_input = !jmax.get<bool>();

  inst.c = parse_vector(require(doc, "c", "instance"), "c");
  if (inst.c.size() != inst.n) throw DimensionError("field 'c': length != n");
  if (inst.minimize_input) inst.c = -inst.c;

  inst.E = parse_matrix(require(doc, "E", "instance"), inst.n, "E");
  inst.h = parse_vector(require(doc, "h", "instance"), "h");
  if (inst.h.size() != inst.E.rows()) throw DimensionError("field 'h': length != rows(E)");

  const json& jcones = require(doc, "cones", "instance");
  if (!jcones.is_array()) throw ParseError("field 'cones': expected an array");
  for (std::size_t l = 0; l < jcones.size(); ++l) {
    const std::string w = "cones[" + std::to_string(l) + "]";
    const json& jc = jcones[l];
    if (!jc.is_object()) throw ParseError("field '" + w + "': expected an object");
    reject_unknown(jc, {"A", "b", "a", "b0"}, w);
    ConeBlock cb;
    cb.A = parse_matrix(require(jc, "A", w), inst.n, w + ".A");
    cb.b = parse_vector(require(jc, "b", w), w + ".b");
    if (cb.b.size() != cb.A.rows())
      throw DimensionError("field '" + w + ".b': length " + std::to_string(cb.b.size()) +
                           " != rows(A) " + std::to_string(cb.A.rows()));
    cb.a = parse_vector(require(jc, "a", w), w + ".a");
    if (cb.a.size() != inst.n) throw DimensionError("field '" + w + ".a': length != n");
    cb.b0 = parse_number(require(jc, "b0", w), w + ".b0");
    inst.cones.push_back(std::move(cb));
  }

  const json& jint = require(doc, "int_vars", "instance");
  if (!jint.is_array()) throw ParseError("field 'int_vars': expected an array");
  for (const auto& v : jint) {
    if (!v.is_number_integer()) throw ParseError("field 'int_vars': expected integers");
    inst.int_vars.push_back(v.get<int>());
  }

  inst.lb = parse_vector(require(doc, "lb", "instance"), "lb");
  inst.ub = parse_vector(require(doc, "ub", "instance"), "ub");

  if (auto it = doc.find("meta"); it != doc.end()) {
    if (!it->is_object()) throw ParseError("field 'meta': expected an object");
    for (auto m = it->begin(); m != it->end(); ++m) {
      if (!m.value().is_string()) throw ParseError("field 'meta." + m.key() + "': expected a string");
      inst.meta[m.key()] = m.value().get<std::string>();
    }
  }

  inst.validate();
  return inst;
}

std::string format_instance(const MicqpInstance& inst) {
  inst.validate();
  json doc;
  doc["n"] = inst.n;
  doc["maximize"] = !inst.minimize_input;
  doc["c"] = vector_to_json(inst.minimize_input ? Eigen::VectorXd(-inst.c) : inst.c);
  doc["E"] = matrix_to_json(inst.E);
  doc["h"] = vector_to_json(inst.h);
  json cones = json::array();
  for (const auto& cb : inst.cones) {
    json jc;
    jc["A"] = matrix_to_json(cb.A);
    jc["b"] = vector_to_json(cb.b);
    jc["a"] = vector_to_json(cb.a);
    jc["b0"] = number_to_json(cb.b0);
    cones.push_back(std::move(jc));
  }
  doc["cones"] = std::move(cones);
  doc["int_vars"] = inst.int_vars;
  doc["lb"] = vector_to_json(inst.lb);
  doc["ub"] = vector_to_json(inst.ub);
  if (!inst.meta.empty()) doc["meta"] = inst.meta;
  return doc.dump();
}

MicqpInstance read_instance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_instance(ss.str());
}

void write_instance(const MicqpInstance& inst, const std::filesystem::path& path) {
  const std::string text = format_instance(inst);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text << '\n';
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

double max_cone_violation(const MicqpInstance& inst, const Eigen::VectorXd& x) {
  double worst = -kInf;
  for (const auto& cb : inst.cones) {
    const double y0 = cb.rhs(x);
    worst = std::max(worst, cb.lhs(x).squaredNorm() - y0 * y0);
  }
  return worst;
}

bool cones_satisfied(const MicqpInstance& inst, const Eigen::VectorXd& x, double tol) {
  for (const auto& cb : inst.cones) {
    const double y0 = cb.rhs(x);
    if (y0 < -tol) return false;
    if (cb.lhs(x).squaredNorm() - y0 * y0 > tol) return false;
  }
  return true;
}

double max_integrality_gap(const MicqpInstance& inst, const Eigen::VectorXd& x) {
  double gap = 0.0;
  for (int j : inst.int_vars) gap = std::max(gap, std::abs(x[j] - std::round(x[j])));
  return gap;
}

}  // namespace micqp
