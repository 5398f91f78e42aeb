// Drives the installed CLI binary end to end; the path comes from the build.
#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <rcdens/io.hpp>

#ifndef RCDENS_CLI_PATH
#define RCDENS_CLI_PATH "rcdens"
#endif

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(RCDENS_CLI_PATH) + " " + args + " > cli_test.log 2>&1";
  const int status = std::system(cmd.c_str());
  return status;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Cleanup {
  std::vector<std::string> paths;
  ~Cleanup() {
    for (const auto& p : paths) std::remove(p.c_str());
  }
};

}  // namespace

TEST_CASE("simulate then estimate from the written csv") {
  Cleanup files{{"cli_sample.csv", "cli_est.dump", "cli_test.log"}};

  REQUIRE(run("simulate --n 400 --dim 2 --seed 3 --out cli_sample.csv") == 0);
  const rcdens::SampleMatrix s = rcdens::read_csv("cli_sample.csv", {});
  CHECK(s.rows() == 400);
  CHECK(s.cols() == 3);
  CHECK(s.has_intercept_column());

  REQUIRE(run("estimate --csv cli_sample.csv --grid-points 8 --range-b0 -1.5 1.5 "
              "--range-b1 -1.5 1.5 --penalty l2 --alpha 0.2 --max-iter 200 "
              "--out cli_est.dump") == 0);
  const rcdens::DensityDump dump = rcdens::read_density_dump("cli_est.dump");
  CHECK(dump.density.grid.points_per_axis() == 8);
  CHECK(dump.alpha == 0.2);
  CHECK(dump.alpha_method == rcdens::AlphaMethod::User);
  CHECK(dump.penalty == rcdens::PenaltyKind::L2Squared);
  CHECK(dump.n_sample == 400);
  CHECK(dump.density.mass() == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("selection rules stamp the dump header") {
  Cleanup files{{"cli_lep.dump", "cli_cv.dump", "cli_test.log"}};

  REQUIRE(run("estimate --simulate 300 --dim 2 --grid-points 6 --range-b0 -1.5 1.5 "
              "--range-b1 -1.5 1.5 --penalty l2 --alpha lepskii --alpha-count 4 "
              "--max-iter 150 --seed 5 --out cli_lep.dump") == 0);
  const rcdens::DensityDump lep = rcdens::read_density_dump("cli_lep.dump");
  CHECK(lep.alpha_method == rcdens::AlphaMethod::Lepskii);
  CHECK(lep.alpha > 0.0);

  REQUIRE(run("estimate --simulate 300 --dim 2 --grid-points 6 --range-b0 -1.5 1.5 "
              "--range-b1 -1.5 1.5 --penalty l2 --alpha cv --alpha-count 4 --cv-folds 3 "
              "--max-iter 150 --seed 5 --out cli_cv.dump") == 0);
  const rcdens::DensityDump cv = rcdens::read_density_dump("cli_cv.dump");
  CHECK(cv.alpha_method == rcdens::AlphaMethod::CV);
}

TEST_CASE("estimates are deterministic under a pinned timestamp") {
  Cleanup files{{"cli_det_a.dump", "cli_det_b.dump", "cli_test.log"}};
  const std::string flags =
      "estimate --simulate 250 --dim 2 --grid-points 6 --range-b0 -1.5 1.5 "
      "--range-b1 -1.5 1.5 --penalty h1 --alpha 0.3 --max-iter 120 --seed 11 ";

  const std::string prefix = "SOURCE_DATE_EPOCH=0 ";
  REQUIRE(std::system((prefix + RCDENS_CLI_PATH + " " + flags + "--out cli_det_a.dump > cli_test.log 2>&1").c_str()) == 0);
  REQUIRE(std::system((prefix + RCDENS_CLI_PATH + " " + flags + "--out cli_det_b.dump > cli_test.log 2>&1").c_str()) == 0);
  CHECK(slurp("cli_det_a.dump") == slurp("cli_det_b.dump"));
}

TEST_CASE("refine subcommand produces a finer unit-mass dump") {
  Cleanup files{{"cli_ref_in.dump", "cli_ref_out.dump", "cli_test.log"}};
  REQUIRE(run("estimate --simulate 250 --dim 2 --grid-points 6 --range-b0 -1.5 1.5 "
              "--range-b1 -1.5 1.5 --penalty l2 --alpha 0.2 --max-iter 120 --seed 2 "
              "--out cli_ref_in.dump") == 0);
  REQUIRE(run("refine --in cli_ref_in.dump --grid-points 18 --out cli_ref_out.dump") == 0);
  const rcdens::DensityDump fine = rcdens::read_density_dump("cli_ref_out.dump");
  CHECK(fine.density.grid.points_per_axis() == 18);
  CHECK(fine.density.mass() == Catch::Approx(1.0).margin(1e-6));
  CHECK(fine.density.min_value() >= 0.0);
}

TEST_CASE("operator cache round trip through the cli") {
  Cleanup files{{"cli_op.bin", "cli_op_a.dump", "cli_op_b.dump", "cli_test.log"}};
  const std::string common =
      "--grid-points 6 --range-b0 -1.5 1.5 --range-b1 -1.5 1.5 --penalty l2 "
      "--alpha 0.25 --max-iter 120 --seed 9 ";
  REQUIRE(run("estimate --simulate 250 --dim 2 " + common +
              "--dump-operator cli_op.bin --out cli_op_a.dump") == 0);
  REQUIRE(run("estimate --simulate 250 --dim 2 " + common +
              "--load-operator cli_op.bin --out cli_op_b.dump") == 0);
  const rcdens::DensityDump a = rcdens::read_density_dump("cli_op_a.dump");
  const rcdens::DensityDump b = rcdens::read_density_dump("cli_op_b.dump");
  REQUIRE(a.density.values.size() == b.density.values.size());
  for (std::size_t j = 0; j < a.density.values.size(); ++j) {
    CHECK(a.density.values[j] == b.density.values[j]);
  }
}

TEST_CASE("contradictory or malformed invocations exit nonzero with one-line errors") {
  Cleanup files{{"cli_no_icept.csv", "cli_fail.dump", "cli_test.log"}};

  // no-intercept sample: --shift must be refused
  {
    std::ofstream csv("cli_no_icept.csv");
    for (int i = 0; i < 40; ++i) csv << 0.1 * i << "," << 0.2 * i << "," << 0.05 * i << "\n";
  }
  CHECK(run("estimate --csv cli_no_icept.csv --grid-points 6 --penalty l2 --alpha 0.2 "
            "--shift --out cli_fail.dump") != 0);

  // neither --csv nor --simulate
  CHECK(run("estimate --grid-points 6 --penalty l2 --alpha 0.2 --out cli_fail.dump") != 0);

  // unknown flag
  CHECK(run("estimate --simulate 50 --dim 2 --grid-points 6 --penalty l2 --alpha 0.2 "
            "--no-such-flag --out cli_fail.dump") != 0);

  // missing input file
  CHECK(run("report --in does_not_exist.dump") != 0);

  // range-b2 on a 2-D model
  CHECK(run("estimate --simulate 50 --dim 2 --grid-points 6 --range-b2 0 1 --penalty l2 "
            "--alpha 0.2 --out cli_fail.dump") != 0);
}
