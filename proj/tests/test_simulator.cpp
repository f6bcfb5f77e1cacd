#include <doctest.h>

#include <cmath>
#include <set>

#include "famf/error.hpp"
#include "famf/simulator.hpp"

using namespace famf;

namespace {

SimCondition condition(CmvStrength cmv, bool aligned = true, std::size_t n = 500) {
    SimCondition c;
    c.label = "t";
    c.cmv = cmv;
    c.aligned = aligned;
    c.n = n;
    c.reps = 4;
    c.seed = 19;
    return c;
}

}  // namespace

TEST_CASE("no CMV means zero method loadings") {
    SimDataset d = generate_dataset(condition(CmvStrength::none), 0);
    CHECK(d.truth.w.isZero(0.0));
    Eigen::MatrixXd common = d.truth.population_cov;
    CHECK((common.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("generated design has 24 items on two scales") {
    SimDataset d = generate_dataset(condition(CmvStrength::high), 3);
    CHECK(d.key.size() == 24);
    CHECK(d.data.k() == 24);
    CHECK(d.data.n() == 500);
    auto scales = d.key.scales();
    CHECK(std::set<std::string>(scales.begin(), scales.end()) == std::set<std::string>{"T1", "T2"});
    CHECK(std::count(scales.begin(), scales.end(), "T1") == 12);
    CHECK(d.spec.traits.size() == 2);
    CHECK(d.spec.regressions.size() == 1);
    CHECK((d.truth.theta.array() >= 0.05).all());
    CHECK((d.truth.lambda.array() >= 0.6).all());
    CHECK((d.truth.lambda.array() <= 0.8).all());
    // mean method share matches the condition
    CHECK(d.truth.w.squaredNorm() / 24.0 == doctest::Approx(cmv_share(CmvStrength::high)).epsilon(1e-10));
    CHECK((d.truth.population_cov.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
    for (const auto& it : d.key.items) {
        CHECK(it.page == (it.order + 5) / 6);
        CHECK(it.polarity == (it.reversed ? -1 : 1));
        CHECK(it.length >= 5);
        CHECK(it.length <= 25);
    }
}

TEST_CASE("aligned weights follow the metadata direction") {
    SimDataset d = generate_dataset(condition(CmvStrength::med), 1);
    Eigen::VectorXd w = d.truth.w;
    Eigen::VectorXd rev(24);
    for (int i = 0; i < 24; ++i) rev(i) = d.truth.generating_key.items[static_cast<std::size_t>(i)].reversed;
    Eigen::VectorXd cw = w.array() - w.mean(), cr = rev.array() - rev.mean();
    CHECK(cw.dot(cr) > 0.0);
}

TEST_CASE("misalignment permutes metadata but not item identity") {
    SimCondition c = condition(CmvStrength::high, false);
    SimDataset mis = generate_dataset(c, 2);
    c.aligned = true;
    SimDataset al = generate_dataset(c, 2);
    CHECK(mis.key.names() == al.key.names());
    CHECK(mis.key.scales() == al.key.scales());
    CHECK(mis.truth.generating_key.names() == mis.key.names());
    int moved = 0;
    for (std::size_t i = 0; i < 24; ++i)
        moved += mis.key.items[i].length != mis.truth.generating_key.items[i].length ||
                 mis.key.items[i].reversed != mis.truth.generating_key.items[i].reversed;
    CHECK(moved > 0);
}

TEST_CASE("sample covariance of a huge draw matches the implied covariance") {
    SimDataset d = generate_dataset(condition(CmvStrength::high, true, 1000000), 0);
    MomentSummary m = sample_moments(d.data);
    CHECK((m.cov - d.truth.population_cov).cwiseAbs().maxCoeff() < 0.005);
}

TEST_CASE("misspecified condition carries one cross-loading") {
    SimCondition c = condition(CmvStrength::low);
    c.misspecified = true;
    SimDataset d = generate_dataset(c, 0);
    REQUIRE(d.truth.cross_loading_item.has_value());
    CHECK(d.truth.trait[*d.truth.cross_loading_item] == 0);
    CHECK_FALSE(generate_dataset(condition(CmvStrength::low), 0).truth.cross_loading_item.has_value());
}

TEST_CASE("generation is deterministic per replicate") {
    SimCondition c = condition(CmvStrength::med);
    SimDataset a = generate_dataset(c, 5), b = generate_dataset(c, 5), other = generate_dataset(c, 6);
    CHECK((a.data.values.array() == b.data.values.array()).all());
    CHECK((a.truth.w.array() == b.truth.w.array()).all());
    CHECK_FALSE((a.data.values.array() == other.data.values.array()).all());
    SimDataset shifted = generate_dataset(c, 5, 1);
    CHECK_FALSE((a.data.values.array() == shifted.data.values.array()).all());
}

TEST_CASE("a small condition runs every method and is schedule independent") {
    SimCondition c = condition(CmvStrength::high);
    c.reps = 6;
    StudyOptions one, many;
    one.threads = 1;
    many.threads = 3;
    ConditionResult a = run_condition(c, 0, one), b = run_condition(c, 0, many);
    for (SimMethod m : kSimMethods) {
        const auto& ma = a.method(m);
        const auto& mb = b.method(m);
        CHECK(ma.reps == 6);
        CHECK(ma.successes + ma.failures == 6);
        CHECK(ma.rejection_rate >= 0.0);
        CHECK(ma.rejection_rate <= 1.0);
        CHECK(ma.coverage >= 0.0);
        CHECK(ma.coverage <= 1.0);
        REQUIRE(ma.estimates.size() == mb.estimates.size());
        for (std::size_t i = 0; i < ma.estimates.size(); ++i) {
            if (std::isnan(ma.estimates[i])) {
                CHECK(std::isnan(mb.estimates[i]));
            } else {
                CHECK(ma.estimates[i] == mb.estimates[i]);
            }
        }
    }
    StudyReport rep{{a}};
    std::string csv = study_results_csv(rep);
    CHECK(csv.rfind("condition,cmv_strength,z_informative,n,beta_true,misspecified,method,reps,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    CHECK(csv == study_results_csv(StudyReport{{b}}));
}

TEST_CASE("study design parsing") {
    auto design = parse_study_design(R"([{"label": "a", "cmv_strength": "medium", "z_informative": "misaligned",
                                          "n": 300, "beta_true": 0, "reps": 10},
                                         {"cmv_strength": "high", "seed": 5}])",
                                     77);
    REQUIRE(design.size() == 2);
    CHECK(design[0].cmv == CmvStrength::med);
    CHECK_FALSE(design[0].aligned);
    CHECK(design[0].n == 300);
    CHECK(design[0].beta_true == 0.0);
    CHECK(design[0].seed == 77);
    CHECK(design[1].label == "c2");
    CHECK(design[1].seed == 5);
    CHECK(design[1].reps == 200);
    CHECK_THROWS_AS(parse_study_design("[]", 1), InputError);
    CHECK_THROWS_AS(parse_study_design(R"([{"cmv_strength": "extreme"}])", 1), InputError);
    CHECK_THROWS_AS(parse_study_design(R"([{"n": 10}])", 1), InputError);
    CHECK(cmv_share(CmvStrength::low) == 0.05);
    CHECK(to_string(CmvStrength::med) == "med");
}
