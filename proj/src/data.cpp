#include "ubsr/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ubsr/errors.hpp"

namespace ubsr {

void SyntheticSpec::validate() const {
  if (n < 1 || m < 1) throw Error(ErrorCode::InvalidArgument, "synthetic data needs n >= 1 and m >= 1");
  if (!std::isfinite(corr_coef) || !std::isfinite(mean_lo) || !std::isfinite(mean_hi) || !std::isfinite(std_offset)) {
    throw Error(ErrorCode::InvalidArgument, "synthetic parameters must be finite");
  }
}

SyntheticMoments synthetic_moments(const SyntheticSpec& spec) {
  spec.validate();
  const auto n = static_cast<Eigen::Index>(spec.n);
  SyntheticMoments mo;
  mo.mean.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    mo.mean[i] = n == 1 ? spec.mean_lo
                        : spec.mean_lo + (spec.mean_hi - spec.mean_lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  mo.stddev = mo.mean.array() + spec.std_offset;
  mo.covariance.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double si = mo.stddev[i];
      const double sj = mo.stddev[j];
      const double rho = i == j ? 1.0 : spec.corr_coef * std::sqrt(si * sj);
      mo.covariance(i, j) = rho * si * sj;
    }
  }
  return mo;
}

bool clip_to_psd(Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd ev = eig.eigenvalues();
  if (ev.minCoeff() >= 0.0) return false;
  cov = eig.eigenvectors() * ev.cwiseMax(0.0).asDiagonal() * eig.eigenvectors().transpose();
  return true;
}

double NormalStream::uniform() {
  // 53 random bits, shifted off zero
  return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
}

double NormalStream::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

ReturnsTable generate_synthetic(const SyntheticSpec& spec) {
  SyntheticMoments mo = synthetic_moments(spec);
  ReturnsTable t;
  if (clip_to_psd(mo.covariance)) t.warnings.push_back("covariance was not PSD; negative eigenvalues clipped to 0");

  const auto n = static_cast<Eigen::Index>(spec.n);
  const auto m = static_cast<Eigen::Index>(spec.m);
  Eigen::MatrixXd factor;
  Eigen::LLT<Eigen::MatrixXd> llt(mo.covariance);
  if (llt.info() == Eigen::Success) {
    factor = llt.matrixL();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mo.covariance);
    factor = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  NormalStream rng(spec.seed);
  Eigen::MatrixXd z(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) z(i, j) = rng.next();
  }
  t.values = z * factor.transpose();
  t.values.rowwise() += mo.mean.transpose();
  t.labels.reserve(spec.n);
  for (std::size_t j = 0; j < spec.n; ++j) t.labels.push_back("asset" + std::to_string(j + 1));
  t.provenance = "synthetic(seed=" + std::to_string(spec.seed) + ")";
  return t;
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '"')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '"')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool is_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "null" || s == "NULL";
}

bool parse_double(const std::string& s, double& v) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (b != e && *b == '+') ++b;
  const auto r = std::from_chars(b, e, v);
  return r.ec == std::errc() && r.ptr == e && std::isfinite(v);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::size_t clean_column(std::vector<double>& col, double cutoff, const std::string& label) {
  // leave-one-out z-score: each entry is scored against the others, so a single
  // spike cannot inflate its own standard deviation
  std::size_t k = 0;
  double sum = 0.0;
  for (double v : col) {
    if (std::isnan(v)) continue;
    ++k;
    sum += v;
  }
  std::vector<std::size_t> flagged;
  if (k >= 3) {
    const double kk = static_cast<double>(k);
    const double mean = sum / kk;
    double css = 0.0;
    for (double v : col) {
      if (!std::isnan(v)) css += (v - mean) * (v - mean);
    }
    for (std::size_t i = 0; i < col.size(); ++i) {
      const double v = col[i];
      if (std::isnan(v)) continue;
      // drop v from the mean and the centered sum of squares
      const double mo = (sum - v) / (kk - 1.0);
      const double var = std::max(css - (v - mean) * (v - mean) * kk / (kk - 1.0), 0.0) / (kk - 1.0);
      const double dev = std::abs(v - mo);
      const double sd = std::sqrt(var);
      const bool out = sd > 1e-14 * std::max(1.0, std::abs(mo)) ? dev > cutoff * sd
                                                               : dev > 1e-12 * std::max(1.0, std::abs(mo));
      if (out) flagged.push_back(i);
    }
  }
  for (std::size_t i : flagged) col[i] = std::nan("");
  double s = 0.0;
  std::size_t left = 0;
  for (double v : col) {
    if (!std::isnan(v)) {
      s += v;
      ++left;
    }
  }
  if (left == 0) throw Error(ErrorCode::AllMissingColumn, "column " + label + " has no usable entries");
  const double mean = s / static_cast<double>(left);
  for (double& v : col) {
    if (std::isnan(v)) v = mean;
  }
  return flagged.size();
}

ReturnsTable ingest_csv_text(const std::string& text, const IngestPolicy& policy, const std::string& origin) {
  if (!(policy.outlier_zscore_cutoff > 0.0)) throw Error(ErrorCode::InvalidArgument, "outlier cutoff must be positive");
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  ReturnsTable t;
  while (std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw Error(ErrorCode::Parse, origin + ": no header row");
  if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  t.labels = split(line);
  const std::size_t n = t.labels.size();
  std::vector<std::vector<double>> cols(n);
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != n) {
      throw Error(ErrorCode::Parse, origin + ": row " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                                        " cells, expected " + std::to_string(n));
    }
    for (std::size_t j = 0; j < n; ++j) {
      double v = std::nan("");
      if (!is_missing(cells[j]) && !parse_double(cells[j], v)) {
        throw Error(ErrorCode::Parse, origin + ": row " + std::to_string(lineno) + ", column " + std::to_string(j + 1) +
                                          ": cannot parse '" + cells[j] + "'");
      }
      cols[j].push_back(v);
    }
  }
  const std::size_t m = n ? cols[0].size() : 0;
  if (m == 0) throw Error(ErrorCode::Parse, origin + ": no data rows");
  t.values.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t nulled = clean_column(cols[j], policy.outlier_zscore_cutoff, t.labels[j]);
    if (nulled) t.warnings.push_back(t.labels[j] + ": " + std::to_string(nulled) + " outlier(s) replaced");
    for (std::size_t i = 0; i < m; ++i) t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cols[j][i];
  }
  t.provenance = "csv(" + origin + ")";
  return t;
}

ReturnsTable ingest_csv(const std::string& path, const IngestPolicy& policy) {
  return ingest_csv_text(read_file(path), policy, path);
}

std::string to_csv(const ReturnsTable& t) {
  std::string s;
  for (std::size_t j = 0; j < t.labels.size(); ++j) {
    if (j) s += ',';
    s += t.labels[j];
  }
  s += '\n';
  for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.values.cols(); ++j) {
      if (j) s += ',';
      s += fmt(t.values(i, j));
    }
    s += '\n';
  }
  return s;
}

void write_csv(const ReturnsTable& t, const std::string& path) { write_file(path, to_csv(t)); }

std::vector<double> read_vector_csv(const std::string& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::vector<double> v;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string cell = trim(line);
    if (cell.empty()) continue;
    double x = 0.0;
    if (!parse_double(cell, x)) {
      if (v.empty() && lineno == 1) continue;  // header
      throw Error(ErrorCode::Parse, path + ": line " + std::to_string(lineno) + ": cannot parse '" + cell + "'");
    }
    v.push_back(x);
  }
  if (v.empty()) throw Error(ErrorCode::Parse, path + ": no values");
  return v;
}

void write_vector_csv(const std::vector<double>& v, const std::string& path, const std::string& header) {
  std::string s;
  if (!header.empty()) s += header + '\n';
  for (double x : v) s += fmt(x) + '\n';
  write_file(path, s);
}

}  // namespace ubsr
