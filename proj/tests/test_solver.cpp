#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support/test_utils.hpp"
#include "ums/core/error.hpp"
#include "ums/solve/jacobian_check.hpp"
#include "ums/solve/solver.hpp"

using namespace ums;

namespace {

// r = A x - b over any number of Euclidean blocks stacked in order.
class LinearFactor : public Factor {
 public:
  LinearFactor(std::vector<int> ids, Eigen::MatrixXd a, Eigen::VectorXd b,
               std::vector<int> widths, LossKind loss = LossKind::None)
      : Factor(static_cast<int>(a.rows()), std::move(ids), loss),
        a_(std::move(a)),
        b_(std::move(b)),
        widths_(std::move(widths)) {}

  void evaluate(const std::vector<const Eigen::VectorXd*>& params, Eigen::VectorXd& residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override {
    Eigen::VectorXd x(a_.cols());
    int at = 0;
    for (size_t i = 0; i < params.size(); ++i) {
      x.segment(at, widths_[i]) = *params[i];
      at += widths_[i];
    }
    residual = a_ * x - b_;
    if (jacobians) {
      at = 0;
      for (size_t i = 0; i < params.size(); ++i) {
        (*jacobians)[i] = a_.middleCols(at, widths_[i]);
        at += widths_[i];
      }
    }
  }

 private:
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
  std::vector<int> widths_;
};

// r = q (-) q_target, the left-perturbation log difference.
class RotationPriorFactor : public Factor {
 public:
  RotationPriorFactor(int id, Rotation target)
      : Factor(3, {id}), target_(std::move(target)) {}

  void evaluate(const std::vector<const Eigen::VectorXd*>& params, Eigen::VectorXd& residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override {
    const Rotation q = rotation_from_vector(*params[0]);
    const Vec3 r = (q * target_.inverse()).log();
    residual = r;
    if (jacobians) {
      // d/d(delta) log(exp(delta) q target^-1) = Jl^-1(r) = Jr(-r)^-1
      (*jacobians)[0] = so3_left_jacobian_inverse(r);
    }
  }

 private:
  Rotation target_;
};

// Scalar valley (x - y^2)^2 + small (y - 2)^2 pull; curved, needs iterations.
class ValleyFactor : public Factor {
 public:
  ValleyFactor(int idx, int idy) : Factor(2, {idx, idy}) {}
  void evaluate(const std::vector<const Eigen::VectorXd*>& params, Eigen::VectorXd& residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override {
    const double x = (*params[0])(0), y = (*params[1])(0);
    residual.resize(2);
    residual << 10.0 * (x - y * y), 0.5 * (y - 2.0);
    if (jacobians) {
      (*jacobians)[0] << 10.0, 0.0;
      (*jacobians)[1] << -20.0 * y, 0.5;
    }
  }
};

// Residual fine, Jacobian sign flipped: every LM step increases the cost.
class LiarFactor : public Factor {
 public:
  explicit LiarFactor(int id) : Factor(1, {id}) {}
  void evaluate(const std::vector<const Eigen::VectorXd*>& params, Eigen::VectorXd& residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override {
    residual.resize(1);
    residual(0) = (*params[0])(0) + 5.0;
    if (jacobians) (*jacobians)[0](0, 0) = -1.0;
  }
};

class NanFactor : public Factor {
 public:
  explicit NanFactor(int id) : Factor(1, {id}) {}
  void evaluate(const std::vector<const Eigen::VectorXd*>&, Eigen::VectorXd& residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override {
    residual.resize(1);
    residual(0) = std::numeric_limits<double>::quiet_NaN();
    if (jacobians) (*jacobians)[0](0, 0) = 1.0;
  }
};

ParameterBlock euclidean_block(int id, const Eigen::VectorXd& value) {
  ParameterBlock b;
  b.id = id;
  b.value = value;
  return b;
}

}  // namespace

TEST_CASE("huber loss hand values") {
  CHECK(robust_loss(LossKind::Huber, 0.25).rho == doctest::Approx(0.25));
  CHECK(robust_loss(LossKind::Huber, 0.25).rho_prime == doctest::Approx(1.0));
  CHECK(robust_loss(LossKind::Huber, 1.0).rho == doctest::Approx(1.0));
  CHECK(robust_loss(LossKind::Huber, 4.0).rho == doctest::Approx(3.0));
  CHECK(robust_loss(LossKind::Huber, 4.0).rho_prime == doctest::Approx(0.5));
  CHECK(robust_loss(LossKind::None, 4.0).rho == doctest::Approx(4.0));
  CHECK(robust_loss(LossKind::None, 4.0).rho_prime == doctest::Approx(1.0));
  CHECK_THROWS_AS((void)robust_loss(LossKind::Huber, -0.1), Error);
}

TEST_CASE("huber is continuous and once-differentiable at the corner") {
  const double eps = 1e-9;
  const auto lo = robust_loss(LossKind::Huber, 1.0 - eps);
  const auto hi = robust_loss(LossKind::Huber, 1.0 + eps);
  CHECK(std::abs(lo.rho - hi.rho) < 1e-8);
  CHECK(std::abs(lo.rho_prime - hi.rho_prime) < 1e-8);
}

TEST_CASE("linear least squares matches the closed form in one accepted step") {
  auto rng = test::make_rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd a(8, 3);
  Eigen::VectorXd b(8);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 3; ++j) a(i, j) = u(rng);
    b(i) = u(rng);
  }
  a.diagonal().array() += 2.0;  // well conditioned

  Problem problem;
  problem.add_block(euclidean_block(0, Eigen::VectorXd::Zero(3)));
  problem.add_factor(std::make_shared<LinearFactor>(std::vector<int>{0}, a, b, std::vector<int>{3}));
  const SolveReport report = solve(problem, SolverConfig{});

  const Eigen::VectorXd closed_form = (a.transpose() * a).ldlt().solve(a.transpose() * b);
  CHECK((problem.block(0).value - closed_form).norm() < 1e-8);
  CHECK(report.termination == Termination::Converged);
  CHECK(report.final_cost <= report.initial_cost);
}

TEST_CASE("scalar quadratic converges from zero in at most two iterations") {
  // r = x - 3 starting at x = 0
  Problem problem;
  problem.add_block(euclidean_block(0, Eigen::VectorXd::Zero(1)));
  Eigen::MatrixXd a(1, 1);
  a(0, 0) = 1.0;
  Eigen::VectorXd b(1);
  b(0) = 3.0;
  problem.add_factor(std::make_shared<LinearFactor>(std::vector<int>{0}, a, b, std::vector<int>{1}));
  const SolveReport report = solve(problem, SolverConfig{});
  CHECK(problem.block(0).value(0) == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(report.iterations <= 2);
  CHECK(report.termination == Termination::Converged);
}

TEST_CASE("curved valley reaches its minimum") {
  Problem problem;
  problem.add_block(euclidean_block(0, Eigen::VectorXd::Constant(1, -1.5)));
  problem.add_block(euclidean_block(1, Eigen::VectorXd::Constant(1, -1.0)));
  problem.add_factor(std::make_shared<ValleyFactor>(0, 1));
  SolverConfig config;
  config.max_iterations = 100;
  const SolveReport report = solve(problem, SolverConfig{config});
  CHECK(problem.block(1).value(0) == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(problem.block(0).value(0) == doctest::Approx(4.0).epsilon(1e-5));
  CHECK(report.final_cost < 1e-12);
}

TEST_CASE("rotation block converges to its prior") {
  Problem problem;
  ParameterBlock rot;
  rot.id = 7;
  rot.kind = ManifoldKind::Rotation;
  rot.value = rotation_to_vector(Rotation::exp(Vec3(0.3, -0.2, 0.9)));
  problem.add_block(rot);
  const Rotation target = Rotation::exp(Vec3(-0.4, 0.6, 0.1));
  problem.add_factor(std::make_shared<RotationPriorFactor>(7, target));
  const SolveReport report = solve(problem, SolverConfig{});
  CHECK(rotation_from_vector(problem.block(7).value).angle_to(target) < 1e-8);
  CHECK(report.termination == Termination::Converged);
}

TEST_CASE("frozen tangent dims stay put while the rest move") {
  Problem problem;
  ParameterBlock b0 = euclidean_block(0, Eigen::VectorXd::Zero(3));
  b0.frozen_dims = {1};
  problem.add_block(b0);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
  Eigen::VectorXd b(3);
  b << 1.0, 2.0, 3.0;
  problem.add_factor(std::make_shared<LinearFactor>(std::vector<int>{0}, a, b, std::vector<int>{3}));
  solve(problem, SolverConfig{});
  CHECK(problem.block(0).value(0) == doctest::Approx(1.0));
  CHECK(problem.block(0).value(1) == doctest::Approx(0.0));  // frozen
  CHECK(problem.block(0).value(2) == doctest::Approx(3.0));
}

TEST_CASE("constant blocks are never touched") {
  Problem problem;
  problem.add_block(euclidean_block(0, Eigen::VectorXd::Zero(2)));
  ParameterBlock fixed = euclidean_block(1, Eigen::VectorXd::Constant(2, 0.5));
  fixed.constant = true;
  problem.add_block(fixed);
  Eigen::MatrixXd a(2, 4);
  a << 1, 0, 1, 0, 0, 1, 0, 1;
  Eigen::VectorXd b(2);
  b << 2.0, 3.0;
  problem.add_factor(
      std::make_shared<LinearFactor>(std::vector<int>{0, 1}, a, b, std::vector<int>{2, 2}));
  solve(problem, SolverConfig{});
  CHECK((problem.block(1).value - Eigen::VectorXd::Constant(2, 0.5)).norm() == doctest::Approx(0.0));
  CHECK(problem.block(0).value(0) == doctest::Approx(1.5));
  CHECK(problem.block(0).value(1) == doctest::Approx(2.5));
}

TEST_CASE("schur elimination of scalar depth blocks matches the dense solve") {
  // Same quadratic assembled twice: once with InverseDepth blocks (eliminated),
  // once with plain Euclidean scalars. Solutions must agree to solver precision.
  auto rng = test::make_rng(32);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n_land = 6;
  Eigen::MatrixXd couple(2, 1);

  auto build = [&](bool as_depth) {
    Problem problem;
    problem.add_block(euclidean_block(0, Eigen::VectorXd::Zero(2)));
    auto rng_local = test::make_rng(99);
    std::uniform_real_distribution<double> ul(0.5, 2.0);
    for (int i = 0; i < n_land; ++i) {
      ParameterBlock lb;
      lb.id = 10 + i;
      lb.kind = as_depth ? ManifoldKind::InverseDepth : ManifoldKind::Euclidean;
      lb.value = Eigen::VectorXd::Constant(1, ul(rng_local));
      problem.add_block(lb);
      Eigen::MatrixXd a(3, 3);
      Eigen::VectorXd b(3);
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) a(r, c) = u(rng);
        b(r) = u(rng) + 1.5;
      }
      a.col(2).array() += 1.5;  // keep depth observable and positive at the optimum
      a(0, 0) += 1.0;
      a(1, 1) += 1.0;
      problem.add_factor(std::make_shared<LinearFactor>(std::vector<int>{0, 10 + i}, a, b,
                                                        std::vector<int>{2, 1}));
    }
    return problem;
  };

  auto rng_a = test::make_rng(32);
  Problem with_schur = build(true);
  rng = test::make_rng(32);
  Problem dense = build(false);
  SolverConfig config;
  config.max_iterations = 50;
  solve(with_schur, config);
  solve(dense, config);
  CHECK((with_schur.block(0).value - dense.block(0).value).norm() < 1e-7);
  for (int i = 0; i < n_land; ++i) {
    CHECK(with_schur.block(10 + i).value(0) ==
          doctest::Approx(dense.block(10 + i).value(0)).epsilon(1e-6));
  }
  (void)rng_a;
  (void)couple;
}

TEST_CASE("huber loss tames outliers in a location fit") {
  // Fit a scalar location to inliers near 1 plus one wild outlier at 1000.
  auto make = [](LossKind loss) {
    Problem problem;
    problem.add_block(euclidean_block(0, Eigen::VectorXd::Zero(1)));
    Eigen::MatrixXd a(1, 1);
    a(0, 0) = 1.0;
    for (double obs : {0.9, 1.0, 1.1, 1.05, 0.95, 1000.0}) {
      Eigen::VectorXd b(1);
      b(0) = obs;
      problem.add_factor(
          std::make_shared<LinearFactor>(std::vector<int>{0}, a, b, std::vector<int>{1}, loss));
    }
    SolverConfig config;
    config.max_iterations = 200;
    solve(problem, config);
    return problem.block(0).value(0);
  };
  const double plain = make(LossKind::None);
  const double robust = make(LossKind::Huber);
  CHECK(plain > 100.0);   // dragged away by the outlier
  CHECK(robust < 10.0);   // outlier influence bounded
  CHECK(std::abs(robust - 1.0) < std::abs(plain - 1.0) / 10.0);
}

TEST_CASE("trust region failure is reported when no step can decrease the cost") {
  Problem problem;
  problem.add_block(euclidean_block(0, Eigen::VectorXd::Zero(1)));
  problem.add_factor(std::make_shared<LiarFactor>(0));
  const SolveReport report = solve(problem, SolverConfig{});
  CHECK(report.termination == Termination::TrustRegionFailure);
  CHECK(report.final_cost == doctest::Approx(report.initial_cost));
}

TEST_CASE("non-finite residual at the start raises NumericalFailure") {
  Problem problem;
  problem.add_block(euclidean_block(0, Eigen::VectorXd::Zero(1)));
  problem.add_factor(std::make_shared<NanFactor>(0));
  try {
    solve(problem, SolverConfig{});
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NumericalFailure);
  }
}

TEST_CASE("problem structure errors") {
  Problem problem;
  problem.add_block(euclidean_block(0, Eigen::VectorXd::Zero(1)));
  CHECK_THROWS_AS(problem.add_block(euclidean_block(0, Eigen::VectorXd::Zero(1))), Error);

  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(1, 1);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(1);
  problem.add_factor(
      std::make_shared<LinearFactor>(std::vector<int>{42}, a, b, std::vector<int>{1}));
  CHECK_THROWS_AS(solve(problem, SolverConfig{}), Error);
}

TEST_CASE("jacobian check accepts exact linear jacobians and flags a broken one") {
  Eigen::MatrixXd a(2, 3);
  a << 1, 2, 3, 4, 5, 6;
  Eigen::VectorXd b(2);
  b << 1, 1;
  LinearFactor good({0}, a, b, {3});
  ParameterBlock block = euclidean_block(0, Eigen::VectorXd::Constant(3, 0.7));
  CHECK(check_jacobian(good, {block}) < 1e-9);

  class Broken : public Factor {
   public:
    Broken() : Factor(1, {0}) {}
    void evaluate(const std::vector<const Eigen::VectorXd*>& params, Eigen::VectorXd& residual,
                  std::vector<Eigen::MatrixXd>* jacobians) const override {
      residual.resize(1);
      residual(0) = 2.0 * (*params[0])(0);
      if (jacobians) (*jacobians)[0](0, 0) = 1.0;  // should be 2
    }
  } broken;
  ParameterBlock scalar = euclidean_block(0, Eigen::VectorXd::Constant(1, 0.3));
  CHECK(check_jacobian(broken, {scalar}) > 0.1);
}

TEST_CASE("jacobian check covers rotation blocks through the manifold") {
  RotationPriorFactor factor(3, Rotation::exp(Vec3(0.2, 0.1, -0.5)));
  ParameterBlock rot;
  rot.id = 3;
  rot.kind = ManifoldKind::Rotation;
  rot.value = rotation_to_vector(Rotation::exp(Vec3(-0.1, 0.4, 0.2)));
  CHECK(check_jacobian(factor, {rot}) < 1e-5);
}

TEST_CASE("solver respects a wall-clock budget") {
  Problem problem;
  problem.add_block(euclidean_block(0, Eigen::VectorXd::Constant(1, -1.5)));
  problem.add_block(euclidean_block(1, Eigen::VectorXd::Constant(1, -1.0)));
  problem.add_factor(std::make_shared<ValleyFactor>(0, 1));
  SolverConfig config;
  config.max_iterations = 1000000;
  config.max_time_ms = 1.0;
  config.cost_tolerance = 0.0;
  config.gradient_tolerance = 0.0;
  const SolveReport report = solve(problem, config);
  CHECK(report.wall_time_ms < 500.0);
}
