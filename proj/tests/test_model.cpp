#include <gtest/gtest.h>

#include "hzdrom/embedding.hpp"
#include "hzdrom/model.hpp"
#include "support.hpp"

using namespace hzdrom;
using namespace hzdrom::testing;

namespace {

const RobotModel kModel = RobotModel::default_biped();

// Each link replaced by n equal point masses at midpoints of n segments.
Mat5 point_mass_mass_matrix(const RobotModel& m, const Vec5& q, int n) {
  Mat5 d = Mat5::Zero();
  for (int i = 0; i < 5; ++i) {
    const double len = m.link(i).length;
    for (int k = 0; k < n; ++k) {
      const double f = (k + 0.5) / n;
      const Mat25 j = complex_jacobian(m, q, [&](const auto& p) {
        switch (i) {
          case 0: return along(p.knee, p.theta[0], -f * len);
          case 1: return along(p.hip, p.theta[1], -f * len);
          case 2: return along(p.hip, p.theta[2], f * len);
          case 3: return along(p.hip, p.theta[3], -f * len);
          default: return along(p.swing_knee, p.theta[4], -f * len);
        }
      });
      d += m.link(i).mass / n * j.transpose() * j;
    }
  }
  return d;
}

Mat5 mass_matrix_rate(const RobotModel& m, const Vec5& q, const Vec5& qd, double h = 1e-6) {
  return (mass_matrix(m, q + h * qd) - mass_matrix(m, q - h * qd)) / (2 * h);
}

}  // namespace

TEST(Model, MassMatrixSymmetricPositiveDefinite) {
  std::mt19937_64 rng(11);
  for (int n = 0; n < 1000; ++n) {
    const Mat5 d = mass_matrix(kModel, random_q(rng));
    ASSERT_LT((d - d.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Mat5> es(d);
    ASSERT_GT(es.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(Model, MassMatrixIndependentOfStanceAngle) {
  std::mt19937_64 rng(12);
  for (int n = 0; n < 1000; ++n) {
    Vec5 q = random_q(rng);
    const Mat5 d0 = mass_matrix(kModel, q);
    q(0) += 0.37;
    ASSERT_LT((mass_matrix(kModel, q) - d0).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Model, MassMatrixMatchesRigidBodyOracle) {
  std::mt19937_64 rng(13);
  for (int n = 0; n < 200; ++n) {
    const Vec5 q = random_q(rng);
    const Mat5 d = mass_matrix(kModel, q), o = oracle_mass_matrix(kModel, q);
    ASSERT_LT((d - o).norm() / o.norm(), 1e-12);
  }
}

TEST(Model, UprightMassMatrixMatchesPointMassDiscretization) {
  const Vec5 q = Vec5::Zero();
  const Mat5 d = mass_matrix(kModel, q);
  const Mat5 o = point_mass_mass_matrix(kModel, q, 2000);
  EXPECT_NEAR(d(0, 0), o(0, 0), 1e-4 * o(0, 0));
  EXPECT_LT((d - o).norm() / o.norm(), 1e-4);
}

TEST(Model, ComMatchesOracle) {
  std::mt19937_64 rng(14);
  for (int n = 0; n < 200; ++n) {
    const Vec5 q = random_q(rng);
    const Pose<double> p = pose(kModel, q);
    Vec2 com = Vec2::Zero();
    for (int i = 0; i < 5; ++i) com += kModel.link(i).mass * Vec2(p.com[i][0], p.com[i][1]);
    com /= kModel.total_mass();
    ASSERT_LT((fk(kModel, q).com - com).norm(), 1e-6);
  }
}

TEST(Model, KeypointsMatchOracle) {
  std::mt19937_64 rng(15);
  for (int n = 0; n < 200; ++n) {
    const Vec5 q = random_q(rng);
    const Pose<double> p = pose(kModel, q);
    const Keypoints k = fk(kModel, q);
    auto near = [](const Vec2& a, const Point<double>& b) { return (a - Vec2(b[0], b[1])).norm() < 1e-12; };
    ASSERT_TRUE(near(k.stance_knee, p.knee));
    ASSERT_TRUE(near(k.hip, p.hip));
    ASSERT_TRUE(near(k.torso_tip, p.tip));
    ASSERT_TRUE(near(k.swing_knee, p.swing_knee));
    ASSERT_TRUE(near(k.swing_foot, p.foot));
  }
}

TEST(Model, UprightKeypoints) {
  const Keypoints k = fk(kModel, Vec5::Zero());
  EXPECT_LT((k.stance_knee - Vec2(0, 0.4)).norm(), 1e-15);
  EXPECT_LT((k.hip - Vec2(0, 0.8)).norm(), 1e-15);
  EXPECT_LT((k.torso_tip - Vec2(0, 1.3)).norm(), 1e-15);
  EXPECT_LT((k.swing_knee - Vec2(0, 0.4)).norm(), 1e-15);
  EXPECT_LT(k.swing_foot.norm(), 1e-15);
}

TEST(Model, MirroredConfigurationMirrorsKeypoints) {
  std::mt19937_64 rng(16);
  for (int n = 0; n < 50; ++n) {
    const Vec5 q = random_q(rng);
    const Keypoints a = fk(kModel, q), b = fk(kModel, -q);
    for (auto [pa, pb] : {std::pair{a.hip, b.hip}, {a.torso_tip, b.torso_tip}, {a.swing_foot, b.swing_foot}}) {
      ASSERT_NEAR(pa(0), -pb(0), 1e-14);
      ASSERT_NEAR(pa(1), pb(1), 1e-14);
    }
  }
}

TEST(Model, JacobiansMatchComplexStep) {
  std::mt19937_64 rng(17);
  for (int n = 0; n < 100; ++n) {
    const Vec5 q = random_q(rng);
    const Mat25 j = complex_jacobian(kModel, q, [](const auto& p) { return p.foot; });
    ASSERT_LT((swing_foot_jacobian(kModel, q) - j).norm(), 1e-12);
  }
}

TEST(Model, GravityVectorIsPotentialGradient) {
  std::mt19937_64 rng(18);
  const double h = 1e-6;
  for (int n = 0; n < 100; ++n) {
    const Vec5 q = random_q(rng);
    Vec5 grad;
    for (int k = 0; k < 5; ++k) {
      Vec5 e = Vec5::Zero();
      e(k) = h;
      grad(k) = (potential_energy(kModel, q + e) - potential_energy(kModel, q - e)) / (2 * h);
    }
    ASSERT_LT((bias_vector(kModel, q, Vec5::Zero()) - grad).norm(), 1e-6 * grad.norm());
    ASSERT_NEAR(potential_energy(kModel, q), oracle_potential(kModel, q), 1e-10);
  }
}

TEST(Model, CoriolisSkewSymmetry) {
  std::mt19937_64 rng(19);
  for (int n = 0; n < 100; ++n) {
    const Vec5 q = random_q(rng), qd = random_qd(rng);
    const Mat5 n_mat = mass_matrix_rate(kModel, q, qd) - 2 * coriolis_matrix(kModel, q, qd);
    ASSERT_LT((n_mat + n_mat.transpose()).cwiseAbs().maxCoeff(), 1e-7);
  }
}

TEST(Model, BiasMatchesEulerLagrangeOracle) {
  std::mt19937_64 rng(20);
  for (int n = 0; n < 1000; ++n) {
    const Vec5 q = random_q(rng), qd = random_qd(rng);
    const Vec5 h = bias_vector(kModel, q, qd), o = oracle_bias(kModel, q, qd);
    ASSERT_LT((h - o).norm() / o.norm(), 1e-5) << "state " << n;
  }
}

TEST(Model, KineticEnergyIsQuadraticForm) {
  std::mt19937_64 rng(21);
  for (int n = 0; n < 50; ++n) {
    const Vec5 q = random_q(rng), qd = random_qd(rng);
    const Energies e = energies(kModel, q, qd);
    ASSERT_NEAR(e.kinetic, 0.5 * qd.dot(oracle_mass_matrix(kModel, q) * qd), 1e-10);
    ASSERT_NEAR(e.potential, oracle_potential(kModel, q), 1e-10);
  }
}

TEST(Model, PassiveEnergyDrift) {
  std::mt19937_64 rng(22);
  for (int n = 0; n < 5; ++n) EXPECT_LT(passive_energy_drift(kModel, {random_q(rng), random_qd(rng, 1.0)}, 1.0), 1e-6);
}

TEST(Model, MomentumRateIsInputIndependent) {
  std::mt19937_64 rng(23);
  const double h = 1e-6;
  std::uniform_real_distribution<double> uu(-50, 50);
  for (int n = 0; n < 100; ++n) {
    const FomState x{random_q(rng), random_qd(rng)};
    const Vec4 u(uu(rng), uu(rng), uu(rng), uu(rng));
    const Vec5 qdd = forward_dynamics(kModel, x, u);
    auto momentum = [&](double t) {
      const Vec5 q = x.q + t * x.qd, qd = x.qd + t * qdd;
      return (mass_matrix(kModel, q) * qd)(0);
    };
    const double rate = (momentum(h) - momentum(-h)) / (2 * h);
    ASSERT_NEAR(rate, momentum_rate(kModel, x.q), 1e-5 * (1 + std::abs(rate)));
  }
}

TEST(Model, ForwardDynamicsSatisfiesEquationsOfMotion) {
  std::mt19937_64 rng(24);
  for (int n = 0; n < 100; ++n) {
    const FomState x{random_q(rng), random_qd(rng)};
    const Vec4 u(1, -2, 3, -4);
    const Vec5 qdd = forward_dynamics(kModel, x, u);
    const Vec5 res = mass_matrix(kModel, x.q) * qdd + bias_vector(kModel, x.q, x.qd) - actuation_matrix() * u;
    ASSERT_LT(res.norm(), 1e-9);
  }
}

TEST(Model, RejectsAsymmetricLegs) {
  auto links = RobotModel::default_biped().links();
  links[kSwingShin].mass = 6.0;
  EXPECT_THROW(RobotModel(links, 9.81), ConfigError);
}

TEST(Model, JsonRoundTrip) {
  const RobotModel m = RobotModel::from_json(kModel.to_json());
  EXPECT_EQ(m.total_mass(), kModel.total_mass());
  EXPECT_EQ(mass_matrix(m, Vec5::Constant(0.1)), mass_matrix(kModel, Vec5::Constant(0.1)));
}
