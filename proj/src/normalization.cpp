#include "gti/normalization.hpp"

#include <cmath>

#include "gti/errors.hpp"

namespace gti {

const char* to_string(NormalizationMode mode) {
    switch (mode) {
        case NormalizationMode::multiclass_margin: return "multiclass_margin";
        case NormalizationMode::binary_mean_gap: return "binary_mean_gap";
        case NormalizationMode::per_image: return "per_image";
        case NormalizationMode::global: return "global";
    }
    return "?";
}

namespace {

double sample_margin(const Matrix& scores, int row, int label) {
    const int c = scores.cols();
    double own = scores(row, label);
    double others = 0.0;
    for (int y = 0; y < c; ++y)
        if (y != label) others += scores(row, y);
    return own - others / static_cast<double>(c - 1);
}

void check_positive_finite(double y, const std::string& what) {
    if (!std::isfinite(y) || y <= 0.0)
        throw DegenerateNormalizationError("degenerate normalization: " + what + " = " +
                                           std::to_string(y) +
                                           " (caller may fall back to 1.0 explicitly)");
}

}  // namespace

NormalizationTerm compute_normalization(const Matrix& scores, const std::vector<int>& labels,
                                        NormalizationMode mode) {
    if (scores.rows() == 0) throw std::invalid_argument("normalization needs a nonempty dataset");
    if (static_cast<int>(labels.size()) != scores.rows())
        throw std::invalid_argument("normalization: one label per score row required");

    NormalizationTerm term;
    term.mode = mode;

    NormalizationMode effective = mode;
    if (mode == NormalizationMode::global)
        effective = scores.cols() > 1 ? NormalizationMode::multiclass_margin
                                      : NormalizationMode::binary_mean_gap;

    switch (effective) {
        case NormalizationMode::multiclass_margin: {
            if (scores.cols() < 2)
                throw std::invalid_argument("margin normalization needs >= 2 classes");
            double acc = 0.0;
            for (int r = 0; r < scores.rows(); ++r) acc += sample_margin(scores, r, labels[r]);
            term.value = std::abs(acc / scores.rows());
            check_positive_finite(term.value, "mean margin");
            break;
        }
        case NormalizationMode::binary_mean_gap: {
            if (scores.cols() != 1)
                throw std::invalid_argument("mean-gap normalization needs scalar scores");
            double pos = 0.0, neg = 0.0;
            int npos = 0, nneg = 0;
            for (int r = 0; r < scores.rows(); ++r) {
                if (labels[r] > 0) {
                    pos += scores(r, 0);
                    ++npos;
                } else {
                    neg += scores(r, 0);
                    ++nneg;
                }
            }
            if (npos == 0 || nneg == 0)
                throw DegenerateNormalizationError(
                    "mean-gap normalization needs both positive and negative samples");
            term.value = std::abs(pos / npos - neg / nneg);
            check_positive_finite(term.value, "mean gap");
            break;
        }
        case NormalizationMode::per_image: {
            if (scores.cols() < 2)
                throw std::invalid_argument("per-image normalization needs >= 2 classes");
            term.per_image.resize(scores.rows());
            for (int r = 0; r < scores.rows(); ++r) {
                double y = std::abs(sample_margin(scores, r, labels[r]));
                check_positive_finite(y, "margin of sample " + std::to_string(r));
                term.per_image[r] = y;
            }
            term.value = 0.0;
            for (double y : term.per_image) term.value += y;
            term.value /= term.per_image.size();
            break;
        }
        case NormalizationMode::global:
            break;  // unreachable
    }
    return term;
}

}  // namespace gti
