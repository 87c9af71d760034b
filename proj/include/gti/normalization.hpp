#pragma once

#include <string>
#include <vector>

#include "gti/matrix.hpp"

namespace gti {

/// How the interaction normalization term Y is computed.
///  - multiclass_margin: Y = |E_x[f(x)_{y*} - E_{y != y*} f(x)_y]| over a dataset
///  - binary_mean_gap:   Y = |E_pos[f] - E_neg[f]| for scalar scores
///  - per_image:         the margin formula applied per sample; strengths are
///                       divided by the sample's own term
///  - global:            margin or gap chosen by the score arity, one Y for all
enum class NormalizationMode { multiclass_margin, binary_mean_gap, per_image, global };

const char* to_string(NormalizationMode mode);

struct NormalizationTerm {
    NormalizationMode mode = NormalizationMode::global;
    double value = 1.0;
    std::vector<double> per_image;  // filled only for per_image mode

    double for_image(int index) const {
        return mode == NormalizationMode::per_image ? per_image.at(index) : value;
    }
};

/// Compute the normalization term from raw model outputs (one row per sample,
/// one column per class; a single column for scalar heads). Throws
/// DegenerateNormalizationError on a zero or non-finite gap; callers that want
/// the unnormalized value must pass Y = 1 explicitly.
NormalizationTerm compute_normalization(const Matrix& scores, const std::vector<int>& labels,
                                        NormalizationMode mode);

}  // namespace gti
