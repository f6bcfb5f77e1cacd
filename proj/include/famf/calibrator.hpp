#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "famf/features.hpp"

namespace famf {

// Mean absolute residual correlation of each item with the other items
// (l != i). With cross_scale_only, only partners from a different scale
// count and the divisor is their number.
Eigen::VectorXd residual_signal(const Eigen::MatrixXd& residual_correlations, const std::vector<std::string>& scales,
                                bool cross_scale_only);

struct RidgeFit {
    Eigen::VectorXd gamma;
    Eigen::VectorXd fitted;  // Z * gamma
    double r = 0.0;          // Pearson correlation of m and fitted
    double r2 = 0.0;         // r squared (0 when fitted is constant)
    double explained = 0.0;  // 1 - SSE/SST around the mean of m; may be negative
};

// gamma = (Z'Z + lambda I)^-1 Z'm. Throws NumericError when the system is
// singular (only possible at lambda = 0 with collinear Z).
RidgeFit ridge_fit(const Eigen::MatrixXd& Z, const Eigen::VectorXd& m, double lambda);

struct FinalWeights {
    Eigen::VectorXd w;
    bool flipped = false;  // sign reversed during orientation
};

// Centres Z*gamma, scales it to sum(w^2) = k and orients it. Orientation
// makes corr(w, m) >= 0, or, when orient_feature is given, makes that
// feature's gamma positive. Throws DegenerateError when the centred raw
// weights vanish or corr(w, m) is undefined.
FinalWeights finalize_weights(const Eigen::MatrixXd& Z, const Eigen::VectorXd& gamma, const Eigen::VectorXd& m,
                              std::optional<Eigen::Index> orient_feature = std::nullopt);

struct PlateauRule {
    double relative_r2_change = 0.02;
    double max_weight_change = 0.05;
};

struct SweepPoint {
    double lambda = 0.0;
    bool feasible = false;
    std::string note;
    double r2 = 0.0;
    double r = 0.0;
    double explained = 0.0;
    Eigen::VectorXd gamma;
    Eigen::VectorXd weights;
    double max_weight = 0.0;  // max |w_i|
};

struct LambdaSelection {
    double lambda = 1.0;
    bool plateau_found = false;
    std::vector<SweepPoint> sweep;
    std::vector<std::string> warnings;
};

const std::vector<double>& default_lambda_grid();

// Picks the smallest grid value at which R^2 and the weight profile have
// both stopped moving relative to the previous feasible grid value. Works on
// the feasible points of an already computed sweep.
LambdaSelection choose_plateau(std::vector<SweepPoint> sweep, const PlateauRule& rule = {});

// Evaluates ridge_fit + finalize_weights over the grid, then choose_plateau.
LambdaSelection select_lambda(const Eigen::MatrixXd& Z, const Eigen::VectorXd& m, const std::vector<double>& grid,
                              const PlateauRule& rule = {}, std::optional<Eigen::Index> orient_feature = std::nullopt);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct BootstrapGamma {
    std::vector<Interval> intervals;
    int replicates = 0;
    int redraws = 0;
    std::vector<std::string> warnings;
};

// Percentile (2.5%, 97.5%) intervals for gamma from resampling items with
// replacement. Resampled Z rows are re-centred before each solve. Each
// replicate draws from its own stream keyed by (seed, replicate).
BootstrapGamma bootstrap_gamma(const Eigen::MatrixXd& Z, const Eigen::VectorXd& m, double lambda, int replicates,
                               std::uint64_t seed);

// Type-7 (linear interpolation) sample quantile.
double quantile(std::vector<double> values, double p);

struct CalibrationOptions {
    std::vector<double> grid = default_lambda_grid();
    std::optional<double> lambda;  // skip selection when set
    bool cross_scale_only = false;
    int bootstrap = 2000;          // 0 disables the gamma bootstrap
    std::uint64_t seed = 1;
    std::optional<std::string> orient_feature;
    PlateauRule rule;
};

struct CalibrationResult {
    std::vector<std::string> feature_names;
    Eigen::VectorXd m;
    Eigen::VectorXd gamma;
    std::optional<std::vector<Interval>> gamma_ci;
    Eigen::VectorXd fitted;
    double r = 0.0;
    double r2 = 0.0;
    double explained = 0.0;
    Eigen::VectorXd w;
    double lambda = 1.0;
    bool plateau_found = false;
    bool flipped = false;
    bool cross_scale_only = false;
    std::vector<SweepPoint> sweep;
    std::vector<std::string> warnings;
};

// Full calibration from a residual-correlation matrix and encoded metadata.
CalibrationResult calibrate(const Eigen::MatrixXd& residual_correlations, const std::vector<std::string>& scales,
                            const FeatureMatrix& features, const CalibrationOptions& options);

}  // namespace famf
