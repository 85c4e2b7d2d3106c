#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ubsr {

struct SyntheticSpec {
  std::size_t n = 10;
  std::size_t m = 100;
  std::uint64_t seed = 0;
  double corr_coef = 0.35;
  double mean_lo = 0.05;
  double mean_hi = 0.50;
  double std_offset = 0.05;
  void validate() const;
};

struct ReturnsTable {
  Eigen::MatrixXd values;  // rows are dates, columns assets
  std::vector<std::string> labels;
  std::string provenance;  // "synthetic(seed=..)" or "csv(path)"
  std::vector<std::string> warnings;
};

// Target moments of the synthetic recipe.
struct SyntheticMoments {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
  Eigen::MatrixXd covariance;
};
SyntheticMoments synthetic_moments(const SyntheticSpec& spec);

// Drops negative eigenvalues of a symmetric matrix. Returns true if anything was clipped.
bool clip_to_psd(Eigen::MatrixXd& cov);

// Multivariate normal draws. mt19937_64 feeds a Box-Muller transform so the
// stream does not depend on the standard library's distribution code.
ReturnsTable generate_synthetic(const SyntheticSpec& spec);

class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : gen_(seed) {}
  double next();
  double uniform();  // open interval (0, 1)

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct IngestPolicy {
  double outlier_zscore_cutoff = 10.0;
};

// Header row of labels, one row per date. Empty cells and NA/NaN/null are
// missing. Outliers by leave-one-out z-score are nulled, then every missing
// cell takes the mean of the remaining entries in its column.
ReturnsTable ingest_csv(const std::string& path, const IngestPolicy& policy = {});
ReturnsTable ingest_csv_text(const std::string& text, const IngestPolicy& policy = {},
                             const std::string& origin = "text");

// Cleans one column in place; NaN marks missing. Returns the number of outliers nulled.
std::size_t clean_column(std::vector<double>& col, double cutoff, const std::string& label = "");

void write_csv(const ReturnsTable& table, const std::string& path);
std::string to_csv(const ReturnsTable& table);

// One number per line, optional non-numeric header line.
std::vector<double> read_vector_csv(const std::string& path);
void write_vector_csv(const std::vector<double>& v, const std::string& path, const std::string& header = "");

}  // namespace ubsr
