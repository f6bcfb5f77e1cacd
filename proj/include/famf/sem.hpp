#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "famf/ingest.hpp"
#include "famf/optimizer.hpp"

namespace famf {

// One cell of a model matrix: either fixed at `value` or bound to a free
// parameter. Several cells may share a parameter (equality constraint); the
// two triangles of a symmetric matrix always do.
struct Cell {
    int param = -1;
    double value = 0.0;

    bool is_free() const { return param >= 0; }
};

class CellMatrix {
public:
    CellMatrix() = default;
    CellMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), cells_(rows * cols) {}

    Cell& operator()(std::size_t r, std::size_t c) { return cells_[r * cols_ + c]; }
    const Cell& operator()(std::size_t r, std::size_t c) const { return cells_[r * cols_ + c]; }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Cell> cells_;
};

enum class MethodKind {
    none,
    fixed_weights,  // FAMF: every loading fixed to a supplied weight
    equal_free,     // CLF: one shared free loading
};

struct MethodFactor {
    MethodKind kind = MethodKind::none;
    Eigen::VectorXd weights;

    static MethodFactor none() { return {}; }
    static MethodFactor fixed(Eigen::VectorXd w) { return {MethodKind::fixed_weights, std::move(w)}; }
    static MethodFactor equal() { return {MethodKind::equal_free, {}}; }
};

inline const std::string kMethodLatent = "M";

// Parameter pattern of a LISREL-type covariance structure
//   Sigma = Lambda (I - B)^-1 Psi (I - B)^-T Lambda^T + Theta.
struct SemStructure {
    std::vector<std::string> items;
    std::vector<std::string> latents;  // traits, then the method factor if enabled
    CellMatrix loadings;               // items x latents
    CellMatrix regressions;            // latents x latents, (outcome, predictor)
    CellMatrix latent_cov;             // latents x latents, symmetric
    CellMatrix residual_cov;           // items x items, symmetric
    std::vector<std::string> param_labels;
    Identification identification = Identification::unit_variance;
    bool method_enabled = false;

    std::size_t k() const { return items.size(); }
    std::size_t free_parameters() const { return param_labels.size(); }
    int moments() const { return static_cast<int>(k() * (k() + 1) / 2); }
    int df() const { return moments() - static_cast<int>(free_parameters()); }
    std::optional<std::size_t> param_index(const std::string& label) const;
    std::optional<std::size_t> latent_index(const std::string& name) const;
    int add_param(const std::string& label);
};

// Builds the structure for the model specification over `items` (ItemKey
// order), optionally with an orthogonal unit-variance method factor.
SemStructure build_structure(const ModelSpec& spec, const std::vector<std::string>& items,
                             const MethodFactor& method = MethodFactor::none());

// Independence (null) model: Lambda = 0, Theta diagonal free.
SemStructure independence_structure(const std::vector<std::string>& items);

// Frees the residual covariance between items i and j.
SemStructure free_residual_covariance(const SemStructure& s, std::size_t i, std::size_t j);

struct ModelMatrices {
    Eigen::MatrixXd loadings, regressions, latent_cov, residual_cov;
};

ModelMatrices fill_matrices(const SemStructure& s, const Eigen::VectorXd& params);

// Covariance of the latent variables, (I - B)^-1 Psi (I - B)^-T.
Eigen::MatrixXd latent_covariance(const ModelMatrices& m);

Eigen::MatrixXd implied_covariance(const Eigen::VectorXd& params, const SemStructure& s);

// ML discrepancy ln|Sigma| + tr(S Sigma^-1) - ln|S| - k.
double fml_discrepancy(const Eigen::MatrixXd& S, const Eigen::MatrixXd& sigma);

Eigen::VectorXd start_values(const SemStructure& s, const Eigen::MatrixXd& S);

// F_ML as a function of the free parameters with its analytic gradient.
class MlObjective {
public:
    MlObjective(const SemStructure& s, const Eigen::MatrixXd& S);

    // Returns +infinity when the implied covariance is not positive definite.
    double operator()(const Eigen::VectorXd& params, Eigen::VectorXd* grad) const;
    Objective as_objective() const;

private:
    struct FreeCell {
        Eigen::Index r, c;
        int param;
    };
    const SemStructure* s_;
    Eigen::MatrixXd S_;
    double logdet_S_;
    std::vector<FreeCell> lambda_, beta_, psi_, theta_;
    bool has_regressions_ = false;
};

struct FitIndices {
    double cfi = 0.0;
    double tli = 0.0;
    double rmsea = 0.0;
    double srmr = 0.0;
    double chi_square_null = 0.0;
    int df_null = 0;
};

struct FitOptions {
    BfgsOptions bfgs;
    // Lower bound on uniquenesses; unset means Heywood cases are only flagged.
    std::optional<double> bound_uniqueness;
    bool compute_se = true;
    bool compute_fit_indices = true;
    std::optional<Eigen::VectorXd> start;
};

struct SemSolution {
    SemStructure structure;
    std::size_t n = 0;
    Eigen::VectorXd estimates;
    Eigen::VectorXd se;
    Eigen::MatrixXd acov;
    double f_min = 0.0;
    double chi_square = 0.0;
    int df = 0;
    std::optional<FitIndices> fit;
    Eigen::MatrixXd sample_cov;
    Eigen::MatrixXd implied;
    Eigen::MatrixXd residual_correlations;  // cor(S) - cor(Sigma-hat), zero diagonal
    bool converged = false;
    int iterations = 0;
    double gradient_norm = 0.0;
    std::string message;
    std::vector<std::string> warnings;

    double estimate(const std::string& label) const;
    ModelMatrices matrices() const { return fill_matrices(structure, estimates); }
    // Loadings in the metric of unit-variance latents and items.
    Eigen::MatrixXd standardized_loadings() const;
};

// Minimises F_ML with BFGS from the default start values (or options.start).
// Throws InputError when the structure has negative degrees of freedom and
// NumericError when the implied covariance is not positive definite at the
// start values; non-convergence is reported through SemSolution::converged.
SemSolution fit_model(const MomentSummary& moments, const SemStructure& s, const FitOptions& options = {});

// Independence model solution (closed form: Theta = diag(S)).
SemSolution fit_null_model(const MomentSummary& moments);

FitIndices fit_indices(const SemSolution& model, const SemSolution& null_solution);

// Root mean square of the strictly lower-triangular residual correlations.
double srmr(const Eigen::MatrixXd& residual_correlations);

struct ResidualPocket {
    std::size_t i = 0;
    std::size_t j = 0;
    double r = 0.0;
};

// Top `count` item pairs (i < j) by |residual correlation|; ties broken by
// (i, j) in item order.
std::vector<ResidualPocket> residual_pockets(const Eigen::MatrixXd& residual_correlations, std::size_t count);

}  // namespace famf
