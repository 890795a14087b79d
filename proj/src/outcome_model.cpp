#include "cpo/outcome_model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "cpo/errors.hpp"
#include "cpo/util.hpp"

namespace cpo {

namespace {

Eigen::MatrixXd design_matrix(const std::vector<Text>& texts, const Vocab& vocab, int order) {
    const std::size_t d = feature_dim(vocab, order);
    Eigen::MatrixXd phi(texts.size(), d);
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const auto f = featurize(texts[i], vocab, order);
        for (std::size_t j = 0; j < d; ++j) phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f[j];
    }
    return phi;
}

Eigen::Index svd_rank(const Eigen::BDCSVD<Eigen::MatrixXd>& svd) {
    // Relative threshold on singular values; COD's column-pivot heuristic
    // overestimates rank on tall designs with duplicated rows.
    const auto& sv = svd.singularValues();
    if (sv.size() == 0) return 0;
    const double tol = sv(0) * 1e-10 * static_cast<double>(std::max(svd.rows(), svd.cols()));
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv(i) > tol ? 1 : 0;
    return rank;
}

// Rank of the centered design over the full enumeration; the ceiling any
// sample design can reach for this (vocab, order).
Eigen::Index full_design_rank(const Vocab& vocab, int order) {
    const auto texts = enumerate_texts(vocab);
    Eigen::MatrixXd phi = design_matrix(texts, vocab, order);
    phi = phi.rightCols(phi.cols() - 1);  // drop intercept
    phi.rowwise() -= phi.colwise().mean();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(phi);
    return svd_rank(svd);
}

}  // namespace

double OutcomeModel::predict(const Text& text) const {
    const auto f = featurize(text, vocab, feature_order);
    return dot(f, weights);
}

void OutcomeModel::validate() const {
    vocab.validate();
    if (weights.size() != feature_dim(vocab, feature_order)) throw Error("outcome model weight dimension mismatch");
    for (double w : weights) {
        if (!std::isfinite(w)) throw Error("outcome model weights must be finite");
    }
    if (!(ridge_lambda >= 0.0)) throw Error("outcome model lambda must be >= 0");
}

OutcomeModel fit_outcome_model(const LabeledDataset& ds, int feature_order, double lambda) {
    if (ds.samples.empty()) throw EmptyCorpus("fit_outcome_model: empty dataset");
    if (lambda < 0.0) throw Error("fit_outcome_model: lambda must be >= 0");
    const Vocab& vocab = ds.vocab;
    const auto n = static_cast<Eigen::Index>(ds.samples.size());

    Eigen::MatrixXd phi = design_matrix(ds.texts(), vocab, feature_order);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = ds.samples[static_cast<std::size_t>(i)].outcome;

    // Unpenalized intercept: solve on column-centered features, intercept from means.
    Eigen::MatrixXd x = phi.rightCols(phi.cols() - 1);
    const Eigen::RowVectorXd x_mean = x.colwise().mean();
    x.rowwise() -= x_mean;
    const double y_mean = y.mean();
    const Eigen::VectorXd yc = y.array() - y_mean;

    Eigen::VectorXd w1;
    if (lambda > 0.0) {
        Eigen::MatrixXd gram = x.transpose() * x;
        gram.diagonal().array() += lambda;
        w1 = gram.ldlt().solve(x.transpose() * yc);
    } else {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd_rank(svd) < full_design_rank(vocab, feature_order)) {
            throw SingularDesign("fit_outcome_model: design with rank " + std::to_string(svd_rank(svd)) +
                                 " does not span the realizable feature space; use lambda > 0");
        }
        w1 = svd.solve(yc);  // minimum-norm least squares
    }

    OutcomeModel m;
    m.vocab = vocab;
    m.feature_order = feature_order;
    m.ridge_lambda = lambda;
    m.weights.resize(static_cast<std::size_t>(w1.size()) + 1);
    m.weights[0] = y_mean - x_mean.dot(w1);
    for (Eigen::Index j = 0; j < w1.size(); ++j) m.weights[static_cast<std::size_t>(j) + 1] = w1(j);
    m.trained_on = ds.fingerprint();

    const Eigen::VectorXd resid = y.array() - (phi.rightCols(phi.cols() - 1) * w1).array() - m.weights[0];
    m.train_mse = resid.squaredNorm() / static_cast<double>(n);
    return m;
}

}  // namespace cpo
