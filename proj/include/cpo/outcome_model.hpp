#pragma once

#include <cstdint>
#include <vector>

#include "cpo/simulator.hpp"
#include "cpo/textspace.hpp"

namespace cpo {

// Learned outcome predictor: ridge regression of outcomes on text features,
// intercept unpenalized.
struct OutcomeModel {
    std::vector<double> weights;  // aligned with featurize(text, vocab, feature_order)
    int feature_order = 2;
    double ridge_lambda = 1e-6;
    Vocab vocab;
    double train_mse = 0.0;          // training mean squared error from fit
    std::uint64_t trained_on = 0;    // fingerprint of the training dataset (0 if unknown)

    double predict(const Text& text) const;
    void validate() const;
};

inline constexpr double kDefaultRidgeLambda = 1e-6;

// Closed-form solve of min ||y - Phi w||^2 + lambda * ||w_without_intercept||^2
// on column-centered features. With lambda = 0 the minimum-norm least-squares
// solution is returned, and SingularDesign is thrown when the sample design
// spans fewer directions than the full text enumeration does (the fit would
// leave predictions undetermined on some texts).
OutcomeModel fit_outcome_model(const LabeledDataset& ds, int feature_order, double lambda = kDefaultRidgeLambda);

}  // namespace cpo
