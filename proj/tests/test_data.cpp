#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ubsr/data.hpp"
#include "ubsr/errors.hpp"

using namespace ubsr;

TEST_SUITE("data") {
  TEST_CASE("two asset moments") {
    SyntheticSpec s;
    s.n = 2;
    const auto mo = synthetic_moments(s);
    CHECK(mo.mean[0] == doctest::Approx(0.05));
    CHECK(mo.mean[1] == doctest::Approx(0.50));
    CHECK(mo.stddev[0] == doctest::Approx(0.10));
    CHECK(mo.stddev[1] == doctest::Approx(0.55));
    const double corr = mo.covariance(0, 1) / (mo.stddev[0] * mo.stddev[1]);
    CHECK(corr == doctest::Approx(0.35 * std::sqrt(0.10 * 0.55)).epsilon(1e-12));
    CHECK(mo.covariance(0, 0) == doctest::Approx(0.01));
  }

  TEST_CASE("means are evenly spaced and increasing") {
    SyntheticSpec s;
    s.n = 10;
    const auto mo = synthetic_moments(s);
    for (int i = 1; i < 10; ++i) CHECK(mo.mean[i] - mo.mean[i - 1] == doctest::Approx(0.05));
    s.n = 1;
    CHECK(synthetic_moments(s).mean[0] == doctest::Approx(0.05));
  }

  TEST_CASE("sample means within three standard errors") {
    SyntheticSpec s;
    s.n = 3;
    s.m = 1000000;
    s.seed = 123;
    const auto t = generate_synthetic(s);
    const auto mo = synthetic_moments(s);
    for (int j = 0; j < 3; ++j) {
      const double mean = t.values.col(j).mean();
      CHECK(std::abs(mean - mo.mean[j]) <= 3.0 * mo.stddev[j] / std::sqrt(1e6));
      const double sd = std::sqrt((t.values.col(j).array() - mean).square().mean());
      CHECK(sd == doctest::Approx(mo.stddev[j]).epsilon(0.01));
    }
    const double c01 = ((t.values.col(0).array() - t.values.col(0).mean()) *
                        (t.values.col(1).array() - t.values.col(1).mean()))
                           .mean();
    CHECK(c01 == doctest::Approx(mo.covariance(0, 1)).epsilon(0.05));
  }

  TEST_CASE("same spec gives the same bytes") {
    SyntheticSpec s;
    s.n = 4;
    s.m = 50;
    s.seed = 9;
    CHECK(to_csv(generate_synthetic(s)) == to_csv(generate_synthetic(s)));
    s.seed = 10;
    SyntheticSpec s2 = s;
    s2.seed = 11;
    CHECK(to_csv(generate_synthetic(s)) != to_csv(generate_synthetic(s2)));
  }

  TEST_CASE("normal stream") {
    NormalStream a(5), b(5);
    double sum = 0.0, sq = 0.0;
    for (int k = 0; k < 200000; ++k) {
      const double v = a.next();
      CHECK(v == b.next());
      sum += v;
      sq += v * v;
    }
    CHECK(std::abs(sum / 200000) <= 0.01);
    CHECK(sq / 200000 == doctest::Approx(1.0).epsilon(0.02));
    for (int k = 0; k < 1000; ++k) {
      const double u = a.uniform();
      CHECK(u > 0.0);
      CHECK(u < 1.0);
    }
  }

  TEST_CASE("psd clipping") {
    Eigen::Matrix2d c;
    c << 1.0, 2.0, 2.0, 1.0;
    Eigen::MatrixXd m = c;
    CHECK(clip_to_psd(m));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(3, 3);
    CHECK_FALSE(clip_to_psd(id));
  }

  TEST_CASE("imputation and outliers") {
    std::vector<double> col{1.0, 2.0, std::nan("")};
    CHECK(clean_column(col, 10.0) == 0);
    CHECK(col == std::vector<double>{1.0, 2.0, 1.5});

    std::vector<double> spike{0.0, 0.0, 0.0, 100.0};
    CHECK(clean_column(spike, 3.0) == 1);
    CHECK(spike == std::vector<double>{0.0, 0.0, 0.0, 0.0});

    std::vector<double> clean{0.1, -0.2, 0.05, 0.3, 0.0, -0.1, 0.15, 0.2};
    const auto copy = clean;
    CHECK(clean_column(clean, 10.0) == 0);
    CHECK(clean == copy);

    std::vector<double> empty{std::nan(""), std::nan("")};
    CHECK_THROWS_AS(clean_column(empty, 3.0), Error);
  }

  TEST_CASE("csv text ingest") {
    const auto t = ingest_csv_text("a,b\n1,4\n2,NA\n,6\n", {}, "mem");
    CHECK(t.labels == std::vector<std::string>{"a", "b"});
    CHECK(t.values(2, 0) == doctest::Approx(1.5));
    CHECK(t.values(1, 1) == doctest::Approx(5.0));
    CHECK(t.provenance == "csv(mem)");
  }

  TEST_CASE("ingest of a clean table is the identity") {
    SyntheticSpec s;
    s.n = 3;
    s.m = 40;
    s.seed = 1;
    const auto t = generate_synthetic(s);
    const auto csv = to_csv(t);
    const auto back = ingest_csv_text(csv);
    CHECK(back.values == t.values);
    CHECK(to_csv(back) == csv);
    CHECK(to_csv(ingest_csv_text(to_csv(back))) == csv);
  }

  TEST_CASE("parse errors name the row and column") {
    try {
      ingest_csv_text("a,b\n1,2\n3,xyz\n");
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Parse);
      const std::string msg = e.what();
      CHECK(msg.find("row 3") != std::string::npos);
      CHECK(msg.find("column 2") != std::string::npos);
    }
    CHECK_THROWS_AS(ingest_csv_text("a,b\n1\n"), Error);
    CHECK_THROWS_AS(ingest_csv_text(""), Error);
    try {
      ingest_csv_text("a,b\n1,\n2,\n");
      FAIL("expected missing column");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::AllMissingColumn);
    }
  }

  TEST_CASE("file round trip") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto path = (dir / "ubsr_data_test.csv").string();
    SyntheticSpec s;
    s.n = 2;
    s.m = 10;
    const auto t = generate_synthetic(s);
    write_csv(t, path);
    CHECK(ingest_csv(path).values == t.values);
    const auto vpath = (dir / "ubsr_vec_test.csv").string();
    write_vector_csv({1.5, -2.25, 3.0}, vpath, "x");
    CHECK(read_vector_csv(vpath) == std::vector<double>{1.5, -2.25, 3.0});
    std::filesystem::remove(path);
    std::filesystem::remove(vpath);
    try {
      ingest_csv((dir / "does_not_exist_ubsr.csv").string());
      FAIL("expected io error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Io);
    }
  }

  TEST_CASE("spec validation") {
    SyntheticSpec s;
    s.n = 0;
    CHECK_THROWS_AS(generate_synthetic(s), Error);
  }
}
