#include <doctest.h>

#include <cmath>

#include "famf/error.hpp"
#include "famf/pipeline.hpp"
#include "test_util.hpp"

using namespace famf;

namespace {

// Population covariance of a 4+4 item model with F2 = beta F1 + zeta and a
// method factor with loadings w.
Eigen::MatrixXd population(double beta, const Eigen::VectorXd& w) {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(8, 2);
    L.col(0).head(4) << 0.6, 0.7, 0.8, 0.65;
    L.col(1).tail(4) << 0.75, 0.6, 0.7, 0.8;
    Eigen::MatrixXd phi(2, 2);
    phi << 1, beta, beta, beta * beta + 1;
    Eigen::MatrixXd s = L * phi * L.transpose() + w * w.transpose();
    s.diagonal().array() += 0.5;
    return s;
}

Eigen::VectorXd unit_weights() {
    Eigen::VectorXd w(8);
    w << 1.3, -0.6, 0.9, -1.4, 1.1, -0.8, 0.2, -0.7;
    w.array() -= w.mean();
    return w * std::sqrt(8.0 / w.squaredNorm());
}

struct Fixture {
    ModelSpec spec = test::two_factor(8, true);
    std::vector<std::string> items = test::names("x", 8);
    ResponseMatrix data;
    MomentSummary moments;

    explicit Fixture(const Eigen::MatrixXd& sigma, std::size_t n, std::uint64_t seed)
        : data(test::draw_normal(sigma, n, seed)), moments(sample_moments(data)) {}
};

}  // namespace

TEST_CASE("variant structures") {
    auto spec = test::two_factor(8, true);
    auto items = test::names("x", 8);
    auto base = variant_structure(spec, items, VariantSpec::baseline());
    auto famf = variant_structure(spec, items, VariantSpec::famf(unit_weights()));
    auto clf = variant_structure(spec, items, VariantSpec::clf());
    auto cu = variant_structure(spec, items, VariantSpec::cu({{0, 1}, {2, 5}}));
    CHECK(famf.df() == base.df());
    CHECK(clf.df() == base.df() - 1);
    CHECK(cu.df() == base.df() - 2);
    CHECK(VariantSpec::famf_cu(unit_weights(), {{0, 1}}).name() == "famf_cu");
    CHECK_THROWS_WITH_AS(variant_structure(spec, items, VariantSpec::famf(Eigen::VectorXd::Ones(7))),
                         doctest::Contains("misalignment"), InputError);
    CHECK_THROWS_WITH_AS(variant_structure(spec, items, VariantSpec::famf(Eigen::VectorXd::Constant(8, 0.5))),
                         doctest::Contains("sum(w^2) = k"), InputError);
}

TEST_CASE("FAMF with the generating weights recovers trait loadings") {
    Eigen::VectorXd w = unit_weights();
    Fixture fx(population(0.3, w), 20000, 31);
    SemSolution sol = fit_variant(fx.moments, fx.spec, fx.items, VariantSpec::famf(w));
    REQUIRE(sol.converged);
    const double truth[] = {0.6, 0.7, 0.8, 0.65, 0.75, 0.6, 0.7, 0.8};
    for (int i = 1; i <= 8; ++i) {
        const std::string label = (i <= 4 ? "F1=~x" : "F2=~x") + std::to_string(i);
        CHECK(std::abs(sol.estimate(label) - truth[i - 1]) < 0.03);
    }
    CHECK(std::abs(sol.estimate("F2~F1") - 0.3) < 0.03);
    SemSolution base = fit_variant(fx.moments, fx.spec, fx.items, VariantSpec::baseline());
    CHECK(sol.chi_square < base.chi_square);
}

TEST_CASE("CLF recovers an equal method loading") {
    Fixture fx(population(0.3, Eigen::VectorXd::Constant(8, 0.3)), 20000, 12);
    SemSolution sol = fit_variant(fx.moments, fx.spec, fx.items, VariantSpec::clf());
    REQUIRE(sol.converged);
    CHECK(std::abs(sol.estimate("M=~all") - 0.3) < 0.03);
    CHECK(sol.estimate("M=~all") >= 0.0);
    CHECK(std::abs(sol.estimate("F2~F1") - 0.3) < 0.04);

    SUBCASE("CLF is nested in a free-loading method model") {
        SemStructure free = sol.structure;
        const std::size_t mi = free.latents.size() - 1;
        for (std::size_t i = 1; i < free.k(); ++i) free.loadings(i, mi).param = free.add_param("M=~" + free.items[i]);
        FitOptions opt;
        opt.compute_se = false;
        SemSolution fs = fit_model(fx.moments, free, opt);
        CHECK(sol.chi_square >= fs.chi_square - 1e-8);
    }
}

TEST_CASE("CLF on data without method variance warns") {
    Eigen::MatrixXd sigma = population(0.3, Eigen::VectorXd::Zero(8));
    SemSolution sol = fit_variant(test::population_moments(sigma, 1000), test::two_factor(8, true),
                                  test::names("x", 8), VariantSpec::clf());
    CHECK(sol.estimate("M=~all") < 0.01);
    CHECK(std::find(sol.warnings.begin(), sol.warnings.end(),
                    "no common variance detected (CLF loading at the 0 bound)") != sol.warnings.end());
}

TEST_CASE("key paths are regressions or latent correlations") {
    Fixture fx(population(0.4, Eigen::VectorXd::Zero(8)), 1000, 2);
    SemSolution reg = fit_variant(fx.moments, fx.spec, fx.items, VariantSpec::baseline());
    auto pr = key_paths(reg);
    REQUIRE(pr.size() == 1);
    CHECK(pr[0].label == "F2~F1");
    CHECK_FALSE(reports_correlations(reg.structure));

    SemSolution cor = fit_variant(fx.moments, test::two_factor(8), fx.items, VariantSpec::baseline());
    auto pc = key_paths(cor);
    REQUIRE(pc.size() == 1);
    CHECK(pc[0].label == "F1~~F2");
    CHECK(pc[0].estimate == doctest::Approx(cor.estimate("F1~~F2")).epsilon(1e-10));
    // delta method on a correlation that is itself a parameter reproduces its SE
    auto idx = static_cast<Eigen::Index>(*cor.structure.param_index("F1~~F2"));
    CHECK(pc[0].se == doctest::Approx(cor.se(idx)).epsilon(1e-4));
    // the regression coefficient and the correlation describe the same association
    CHECK(pr[0].estimate / std::sqrt(1 + pr[0].estimate * pr[0].estimate) ==
          doctest::Approx(pc[0].estimate).epsilon(1e-3));
}

TEST_CASE("effect stability") {
    Eigen::VectorXd w = unit_weights();
    Fixture fx(population(0.3, 0.5 * w), 600, 44);
    SemSolution before = fit_variant(fx.moments, fx.spec, fx.items, VariantSpec::baseline());
    SemSolution after = fit_variant(fx.moments, fx.spec, fx.items, VariantSpec::famf(w));
    StabilityOptions opt;
    opt.replicates = 60;
    opt.seed = 42;

    SUBCASE("identical variants give zero differences") {
        auto panel = effect_stability(before, before, fx.data, fx.spec, VariantSpec::baseline(),
                                      VariantSpec::baseline(), opt);
        REQUIRE(panel.rows.size() == 1);
        CHECK(panel.rows[0].delta == 0.0);
        CHECK(panel.rows[0].ci_lo <= 0.0);
        CHECK(panel.rows[0].ci_hi >= 0.0);
        CHECK_FALSE(panel.unreliable);
    }
    SUBCASE("swapping before and after negates every difference") {
        auto ab = effect_stability(before, after, fx.data, fx.spec, VariantSpec::baseline(), VariantSpec::famf(w), opt);
        auto ba = effect_stability(after, before, fx.data, fx.spec, VariantSpec::famf(w), VariantSpec::baseline(), opt);
        CHECK(ab.rows[0].delta == -ba.rows[0].delta);
        CHECK(ab.rows[0].delta == ab.rows[0].after - ab.rows[0].before);
        CHECK(ab.rows[0].ci_lo == doctest::Approx(-ba.rows[0].ci_hi).epsilon(1e-6));
        CHECK(ab.rows[0].ci_hi == doctest::Approx(-ba.rows[0].ci_lo).epsilon(1e-6));
    }
    SUBCASE("seeded bootstrap is reproducible") {
        auto a = effect_stability(before, after, fx.data, fx.spec, VariantSpec::baseline(), VariantSpec::famf(w), opt);
        auto b = effect_stability(before, after, fx.data, fx.spec, VariantSpec::baseline(), VariantSpec::famf(w), opt);
        CHECK(a.rows[0].ci_lo == b.rows[0].ci_lo);
        CHECK(a.rows[0].ci_hi == b.rows[0].ci_hi);
        CHECK(a.failures == b.failures);
    }
    SUBCASE("Wald intervals without the bootstrap") {
        opt.bootstrap = false;
        auto p = effect_stability(before, after, fx.data, fx.spec, VariantSpec::baseline(), VariantSpec::famf(w), opt);
        CHECK_FALSE(p.bootstrap);
        CHECK(std::isnan(p.rows[0].ci_lo));
        CHECK(p.rows[0].wald_after.hi - p.rows[0].after == doctest::Approx(1.959963984540054 * p.rows[0].se_after));
    }
}

TEST_CASE("robustness suite") {
    Eigen::VectorXd w = unit_weights();
    Fixture fx(population(0.3, Eigen::VectorXd::Constant(8, 0.3) + 0.1 * w), 800, 5);
    ItemKey key = test::simple_key(8);
    SemSolution base = fit_variant(fx.moments, fx.spec, fx.items, VariantSpec::baseline());
    RobustnessOptions ro;
    ro.calibration.bootstrap = 0;

    SUBCASE("full feature set") {
        FeatureMatrix fm = encode_features(key, {"reversed", "order", "length"});
        CalibrationResult cal = calibrate(base.residual_correlations, key.scales(), fm, ro.calibration);
        RobustnessReport rep = robustness_suite(fx.moments, fx.spec, key, fm, base, cal, ro);
        REQUIRE(rep.lambda_profile.size() == 5);
        for (const auto& row : rep.lambda_profile) {
            INFO(row.cell.error);
            CHECK(row.cell.ok);
            CHECK(row.cell.paths.size() == 1);
        }
        REQUIRE(rep.lofo.size() == 3);
        CHECK(rep.lofo[1].omitted == "order");
        INFO(rep.clf.error);
        CHECK(rep.clf.ok);
        CHECK(rep.cross_scale_applicable);
        CHECK(rep.cross_scale.ok);
    }
    SUBCASE("single feature and single scale") {
        for (auto& it : key.items) it.scale = "A";
        FeatureMatrix fm = encode_features(key, {"order"});
        CalibrationResult cal = calibrate(base.residual_correlations, key.scales(), fm, ro.calibration);
        RobustnessReport rep = robustness_suite(fx.moments, fx.spec, key, fm, base, cal, ro);
        REQUIRE(rep.lofo.size() == 1);
        CHECK_FALSE(rep.lofo[0].cell.ok);
        CHECK(rep.lofo[0].cell.error.find("no features left") != std::string::npos);
        CHECK_FALSE(rep.cross_scale_applicable);
        CHECK(rep.cross_scale.error == "not applicable (single scale)");
    }
}
