#include "pairlot/dataset.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace pairlot {

double TrialDataset::y(int i, int t) const {
  if (!observed(i, t))
    throw std::logic_error("masked outcome read: subject " + std::to_string(i) + " time " +
                           std::to_string(t));
  return outcomes(i, t);
}

int TrialDataset::n_arm(int a) const {
  int c = 0;
  for (int v : arm) c += (v == a);
  return c;
}

bool TrialDataset::binary_outcomes() const {
  for (int i = 0; i < n; ++i)
    for (int t = 0; t <= ice_time[static_cast<std::size_t>(i)]; ++t) {
      const double v = outcomes(i, t);
      if (v != 0.0 && v != 1.0) return false;
    }
  return true;
}

std::string ValidationReport::to_string() const {
  if (ok()) return "pass";
  std::ostringstream os;
  for (const auto& v : violations) {
    if (v.subject >= 0) os << "subject " << v.subject << ": ";
    os << v.what << "\n";
  }
  return os.str();
}

ValidationReport validate(const TrialDataset& data) {
  ValidationReport rep;
  auto flag = [&rep](int subject, const std::string& what) {
    rep.violations.push_back({subject, what});
  };

  if (data.n <= 0) {
    flag(-1, "empty dataset");
    return rep;
  }
  if (data.tau < 0) flag(-1, "negative tau");
  if (static_cast<int>(data.arm.size()) != data.n ||
      static_cast<int>(data.ice_time.size()) != data.n ||
      data.outcomes.rows() != data.n || data.outcomes.cols() != data.tau + 1 ||
      data.covariates.rows() != data.n || data.covariates.cols() != data.d) {
    flag(-1, "inconsistent dimensions");
    return rep;
  }

  bool any0 = false, any1 = false;
  for (int i = 0; i < data.n; ++i) {
    const int a = data.arm[static_cast<std::size_t>(i)];
    const int t_ice = data.ice_time[static_cast<std::size_t>(i)];
    if (a == 0) any0 = true;
    else if (a == 1) any1 = true;
    else flag(i, "arm not in {0,1}");
    if (t_ice < 0 || t_ice > data.tau) flag(i, "T out of range");
    for (int t = 0; t <= data.tau; ++t) {
      const double v = data.outcomes(i, t);
      if (t <= t_ice && t_ice <= data.tau) {
        if (std::isnan(v)) flag(i, "outcome missing at or before ICE (t=" + std::to_string(t) + ")");
        else if (!std::isfinite(v)) flag(i, "non-finite outcome (t=" + std::to_string(t) + ")");
      } else if (t > t_ice && !std::isnan(v)) {
        flag(i, "outcome present after ICE (t=" + std::to_string(t) + ")");
      }
    }
    for (int j = 0; j < data.d; ++j)
      if (!std::isfinite(data.covariates(i, j)))
        flag(i, "non-finite covariate L" + std::to_string(j + 1));
  }
  if (!any0 || !any1) flag(-1, "single-arm dataset");
  return rep;
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

[[noreturn]] void parse_fail(const std::string& path, int row, const std::string& col,
                             const std::string& what) {
  throw std::runtime_error(path + ": row " + std::to_string(row) + ", column " + col + ": " + what);
}

double parse_double(const std::string& tok, const std::string& path, int row,
                    const std::string& col) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) parse_fail(path, row, col, "malformed number '" + tok + "'");
    return v;
  } catch (const std::invalid_argument&) {
    parse_fail(path, row, col, "malformed number '" + tok + "'");
  } catch (const std::out_of_range&) {
    parse_fail(path, row, col, "number out of range '" + tok + "'");
  }
}

int parse_int(const std::string& tok, const std::string& path, int row, const std::string& col) {
  for (char c : tok)
    if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+'))
      parse_fail(path, row, col, "non-integer value '" + tok + "'");
  try {
    return std::stoi(tok);
  } catch (...) {
    parse_fail(path, row, col, "non-integer value '" + tok + "'");
  }
}

}  // namespace

void save_csv(const TrialDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "id,A,T";
  for (int j = 0; j < data.d; ++j) out << ",L" << (j + 1);
  for (int t = 0; t <= data.tau; ++t) out << ",Y" << t;
  out << "\n";
  for (int i = 0; i < data.n; ++i) {
    out << (i + 1) << ',' << data.arm[static_cast<std::size_t>(i)] << ','
        << data.ice_time[static_cast<std::size_t>(i)];
    for (int j = 0; j < data.d; ++j) out << ',' << format_double(data.covariates(i, j));
    for (int t = 0; t <= data.tau; ++t) {
      if (data.observed(i, t)) out << ',' << format_double(data.outcomes(i, t));
      else out << ",NA";
    }
    out << "\n";
  }
}

TrialDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  const auto header = split_line(line);
  if (header.size() < 4 || header[0] != "id" || header[1] != "A" || header[2] != "T")
    throw std::runtime_error(path + ": header must start with id,A,T");
  int d = 0;
  std::size_t idx = 3;
  while (idx < header.size() && header[idx] == "L" + std::to_string(d + 1)) {
    ++d;
    ++idx;
  }
  int n_y = 0;
  while (idx < header.size() && header[idx] == "Y" + std::to_string(n_y)) {
    ++n_y;
    ++idx;
  }
  if (idx != header.size() || n_y == 0)
    throw std::runtime_error(path + ": header columns must be id,A,T,L1..Ld,Y0..Ytau");
  const int tau = n_y - 1;

  std::vector<int> arm, ice;
  std::vector<std::vector<double>> covs, ys;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto tok = split_line(line);
    if (tok.size() != header.size())
      throw std::runtime_error(path + ": row " + std::to_string(row) + ": expected " +
                               std::to_string(header.size()) + " fields, got " +
                               std::to_string(tok.size()));
    if (tok[1] == "NA") parse_fail(path, row, "A", "NA not allowed");
    const int a = parse_int(tok[1], path, row, "A");
    if (a != 0 && a != 1) parse_fail(path, row, "A", "arm must be 0 or 1");
    const int t_ice = parse_int(tok[2], path, row, "T");
    if (t_ice < 0 || t_ice > tau) parse_fail(path, row, "T", "T out of range");
    std::vector<double> lrow(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
      const std::string col = "L" + std::to_string(j + 1);
      if (tok[static_cast<std::size_t>(3 + j)] == "NA") parse_fail(path, row, col, "NA not allowed");
      lrow[static_cast<std::size_t>(j)] =
          parse_double(tok[static_cast<std::size_t>(3 + j)], path, row, col);
    }
    std::vector<double> yrow(static_cast<std::size_t>(tau + 1));
    for (int t = 0; t <= tau; ++t) {
      const std::string col = "Y" + std::to_string(t);
      const std::string& v = tok[static_cast<std::size_t>(3 + d + t)];
      yrow[static_cast<std::size_t>(t)] = (v == "NA")
                                              ? std::numeric_limits<double>::quiet_NaN()
                                              : parse_double(v, path, row, col);
    }
    arm.push_back(a);
    ice.push_back(t_ice);
    covs.push_back(std::move(lrow));
    ys.push_back(std::move(yrow));
  }

  TrialDataset data;
  data.n = static_cast<int>(arm.size());
  data.tau = tau;
  data.d = d;
  data.arm = std::move(arm);
  data.ice_time = std::move(ice);
  data.covariates.resize(data.n, d);
  data.outcomes.resize(data.n, tau + 1);
  for (int i = 0; i < data.n; ++i) {
    for (int j = 0; j < d; ++j)
      data.covariates(i, j) = covs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    for (int t = 0; t <= tau; ++t)
      data.outcomes(i, t) = ys[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)];
  }
  return data;
}

void save_counterfactual_csv(const CounterfactualPanel& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "id,T0,T1";
  for (int t = 0; t <= panel.tau; ++t) out << ",Y0_" << t;
  for (int t = 0; t <= panel.tau; ++t) out << ",Y1_" << t;
  out << "\n";
  for (int i = 0; i < panel.n; ++i) {
    out << (i + 1) << ',' << panel.t_control[static_cast<std::size_t>(i)] << ','
        << panel.t_treated[static_cast<std::size_t>(i)];
    for (int t = 0; t <= panel.tau; ++t) out << ',' << format_double(panel.y_control(i, t));
    for (int t = 0; t <= panel.tau; ++t) out << ',' << format_double(panel.y_treated(i, t));
    out << "\n";
  }
}

bool consistent(const CounterfactualPanel& panel, const TrialDataset& data) {
  if (panel.n != data.n || panel.tau != data.tau) return false;
  for (int i = 0; i < data.n; ++i) {
    const int a = data.arm[static_cast<std::size_t>(i)];
    const int t_pot = a == 1 ? panel.t_treated[static_cast<std::size_t>(i)]
                             : panel.t_control[static_cast<std::size_t>(i)];
    if (data.ice_time[static_cast<std::size_t>(i)] != t_pot) return false;
    const Eigen::MatrixXd& ypot = a == 1 ? panel.y_treated : panel.y_control;
    for (int t = 0; t <= data.ice_time[static_cast<std::size_t>(i)]; ++t)
      if (data.outcomes(i, t) != ypot(i, t)) return false;
  }
  return true;
}

TrialDataset strip_covariates(const TrialDataset& data) {
  TrialDataset out = data;
  out.d = 0;
  out.covariates.resize(data.n, 0);
  return out;
}

}  // namespace pairlot
