#include <catch2/catch_amalgamated.hpp>

#include <memory>

#include "mot/lp.hpp"
#include "mot/mot.hpp"
#include "mot/rng.hpp"
#include "oracles.hpp"

using namespace mot;

TEST_CASE("dense solve basics", "[lp]") {
  SECTION("max x s.t. x <= 3") {
    LinearProgram lp;
    lp.maximize = true;
    lp.objective = {1.0};
    lp.rows.push_back({{{0, 1.0}}, RowType::le, 3.0});
    const auto s = solve_dense(lp);
    REQUIRE(s.status == LpStatus::optimal);
    CHECK(s.value == Catch::Approx(3.0).margin(1e-12));
    CHECK(s.x[0] == Catch::Approx(3.0).margin(1e-12));
    CHECK(s.row_duals[0] == Catch::Approx(1.0).margin(1e-12));
  }
  SECTION("infeasible pair") {
    LinearProgram lp;
    lp.objective = {0.0};
    lp.rows.push_back({{{0, 1.0}}, RowType::le, 1.0});
    lp.rows.push_back({{{0, 1.0}}, RowType::ge, 2.0});
    CHECK(solve_dense(lp).status == LpStatus::infeasible);
  }
  SECTION("unbounded with ray") {
    LinearProgram lp;
    lp.maximize = true;
    lp.objective = {1.0, 0.0};
    lp.rows.push_back({{{1, 1.0}}, RowType::le, 1.0});
    const auto s = solve_dense(lp);
    REQUIRE(s.status == LpStatus::unbounded);
    REQUIRE(s.ray.size() == 2);
    CHECK(s.ray[0] > 0.5);
  }
}

TEST_CASE("dense solve transport oracle", "[lp]") {
  // w2_squared((0.5,0.5),(1,0)) on {5,10}: the coupling family is a
  // single point, so the brute-force enumeration is exact.
  LinearProgram lp;
  lp.objective = {0.0, 25.0, 25.0, 0.0};
  lp.rows.push_back({{{0, 1.0}, {1, 1.0}}, RowType::eq, 0.5});
  lp.rows.push_back({{{2, 1.0}, {3, 1.0}}, RowType::eq, 0.5});
  lp.rows.push_back({{{0, 1.0}, {2, 1.0}}, RowType::eq, 1.0});
  lp.rows.push_back({{{1, 1.0}, {3, 1.0}}, RowType::eq, 0.0});
  const auto s = solve_dense(lp);
  REQUIRE(s.status == LpStatus::optimal);
  CHECK(s.value == Catch::Approx(12.5).margin(1e-9));

  const oracle::Mat A = {{1, 1, 0, 0}, {0, 0, 1, 1}, {1, 0, 1, 0}, {0, 1, 0, 1}};
  const auto brute = oracle::brute_force_min(A, {0.5, 0.5, 1.0, 0.0}, lp.objective);
  REQUIRE(brute.has_value());
  CHECK(s.value == Catch::Approx(*brute).margin(1e-9));

  // Duality certificates at Optimal.
  CHECK(s.primal_residual <= 1e-8);
  CHECK(s.compl_slack_residual <= 1e-8);
  double dual_obj = 0.5 * s.row_duals[0] + 0.5 * s.row_duals[1] + s.row_duals[2];
  CHECK(dual_obj == Catch::Approx(s.value).margin(1e-8));
}

TEST_CASE("dense solve agrees with brute force on random equality LPs", "[lp]") {
  RngStream rng(42);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t m = 3, n = 6;
    oracle::Mat A(m, std::vector<double>(n));
    LinearProgram lp;
    lp.objective.resize(n);
    lp.rows.resize(m);
    for (std::size_t i = 0; i < m; ++i) lp.rows[i].type = RowType::eq;
    for (std::size_t j = 0; j < n; ++j) {
      lp.objective[j] = rng.uniform01() * 4.0;
      for (std::size_t i = 0; i < m; ++i) {
        A[i][j] = rng.uniform01() < 0.5 ? 0.0 : std::ceil(rng.uniform01() * 3.0);
        if (A[i][j] != 0.0) lp.rows[i].coeffs.emplace_back(static_cast<int>(j), A[i][j]);
      }
    }
    // rhs from a random feasible point keeps the instance feasible.
    std::vector<double> x0(n);
    std::vector<double> b(m, 0.0);
    for (std::size_t j = 0; j < n; ++j) x0[j] = rng.uniform01();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) b[i] += A[i][j] * x0[j];
      lp.rows[i].rhs = b[i];
    }
    const auto s = solve_dense(lp);
    REQUIRE(s.status == LpStatus::optimal);
    const auto brute = oracle::brute_force_min(A, b, lp.objective);
    REQUIRE(brute.has_value());
    CHECK(s.value == Catch::Approx(*brute).margin(1e-7));
  }
}

TEST_CASE("dense solve is deterministic", "[lp]") {
  RngStream rng(7);
  LinearProgram lp;
  const std::size_t n = 12, m = 5;
  lp.objective.resize(n);
  for (auto& c : lp.objective) c = rng.uniform01();
  lp.rows.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    lp.rows[i].type = i % 2 == 0 ? RowType::le : RowType::eq;
    lp.rows[i].rhs = 1.0 + rng.uniform01();
    for (std::size_t j = 0; j < n; ++j)
      lp.rows[i].coeffs.emplace_back(static_cast<int>(j), rng.uniform01());
  }
  const auto a = solve_dense(lp);
  const auto b = solve_dense(lp);
  REQUIRE(a.status == b.status);
  CHECK(a.iterations == b.iterations);
  CHECK(a.x == b.x);
  CHECK(a.row_duals == b.row_duals);
}

TEST_CASE("lazy solve equals dense when family is fully loaded", "[lp]") {
  LinearProgram base;
  base.maximize = true;
  base.objective = {1.0, 1.0};
  base.domains = {VarDomain::free_var, VarDomain::free_var};
  MaterializedFamily fam({{{{0, 1.0}}, 2.0}, {{{1, 1.0}}, 1.0}, {{{0, 1.0}, {1, 1.0}}, 2.5}});
  std::vector<std::uint64_t> all = {0, 1, 2};
  const auto lazy_full = solve_lazy(base, fam, all);
  const auto lazy_empty = solve_lazy(base, fam, {});
  LinearProgram dense_lp = base;
  for (std::uint64_t id : all) {
    const auto r = fam.row(id);
    dense_lp.rows.push_back({r.coeffs, RowType::le, r.rhs});
  }
  const auto dense = solve_dense(dense_lp);
  REQUIRE(lazy_full.status == LpStatus::optimal);
  CHECK(lazy_full.value == Catch::Approx(dense.value).margin(1e-9));
  CHECK(lazy_empty.value == Catch::Approx(dense.value).margin(1e-9));
}

TEST_CASE("lazy dual MOT equals dense primal on random instances", "[lp]") {
  RngStream rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t N = 3, k = 3;
    std::vector<Point> pts;
    for (std::size_t j = 0; j < N; ++j)
      pts.push_back({rng.uniform01() * 4.0, rng.uniform01() * 4.0});
    auto sp = std::make_shared<SupportSpace>(std::move(pts));
    std::vector<Measure> ms;
    for (std::size_t i = 0; i < k; ++i) {
      std::vector<double> w(N);
      double s = 0.0;
      for (auto& v : w) {
        v = 0.05 + rng.uniform01();
        s += v;
      }
      double r2 = 0.0;
      for (auto& v : w) {
        v /= s;
        r2 += v;
      }
      w[N - 1] += 1.0 - r2;
      ms.emplace_back(sp, std::move(w), 100);
    }
    const MeasureCollection coll(std::move(ms));
    MotOptions dense_opts;
    dense_opts.mode = SolveMode::dense;
    MotOptions lazy_opts;
    lazy_opts.mode = SolveMode::lazy;
    const double vd = solve_mot(coll, dense_opts).value;
    const double vl = solve_mot(coll, lazy_opts).value;
    CHECK(vd == Catch::Approx(vl).margin(1e-8));
  }
}

TEST_CASE("lazy solve of the null limit program hits the closed form", "[lp]") {
  // N=2, k=2, a=(1/2,1/2), g1=(0.3,-0.3), g2=(-0.1,0.1):
  // value = c_12 |h_1| with h = sqrt(1/2) g1 - sqrt(1/2) g2.
  auto sp = std::make_shared<SupportSpace>(std::vector<Point>{{5.0}, {10.0}});
  LinearProgram base;
  base.maximize = true;
  const double s = std::sqrt(0.5);
  base.objective = {s * 0.3, s * -0.3, s * -0.1, s * 0.1};
  base.domains.assign(4, VarDomain::free_var);
  for (std::size_t j = 0; j < 2; ++j) {
    LpRow row;
    row.type = RowType::eq;
    row.rhs = 0.0;
    row.coeffs = {{static_cast<int>(j), 1.0}, {static_cast<int>(2 + j), 1.0}};
    base.rows.push_back(row);
  }
  const MotDualFamily family(*sp, 2);
  const auto sol = solve_lazy(base, family, family.seed_rows());
  REQUIRE(sol.status == LpStatus::optimal);
  const double h1 = s * 0.3 - s * -0.1;
  CHECK(sol.value == Catch::Approx(6.25 * std::abs(h1)).margin(1e-8));
}

TEST_CASE("lazy solve respects the row cap", "[lp]") {
  LinearProgram base;
  base.maximize = true;
  base.objective = {1.0};
  base.domains = {VarDomain::free_var};
  std::vector<FamilyRow> rows;
  for (int i = 0; i < 64; ++i) rows.push_back({{{0, 1.0}}, 100.0 - i});
  MaterializedFamily fam(rows);
  LazyCaps caps;
  caps.max_rows = 1;
  CHECK_THROWS_AS(solve_lazy(base, fam, {}, caps), Error);
}

TEST_CASE("stalled status is reported, never silent", "[lp]") {
  LinearProgram lp;
  lp.objective = {1.0, 1.0, 1.0};
  lp.rows.push_back({{{0, 1.0}, {1, 1.0}, {2, 1.0}}, RowType::eq, 1.0});
  SimplexOptions opt;
  opt.max_iters = 0;
  CHECK(solve_dense(lp, opt).status == LpStatus::stalled);
}
