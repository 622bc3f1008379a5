#ifndef AMS_DATASET_HPP
#define AMS_DATASET_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "ams/errors.hpp"
#include "ams/matrix.hpp"

namespace ams {

using ClassId = std::int64_t;

/** Labeled visual features plus one pre-defined semantic prototype per class.
 *
 * class_ids is the canonical sorted label space; prototypes rows align with
 * it. The same shape serves seen (training) and unseen (test) data. */
struct Dataset {
    Matrix features;                // examples x d
    std::vector<ClassId> labels;    // one per example row
    Matrix prototypes;              // classes x n, row i belongs to class_ids[i]
    std::vector<ClassId> class_ids; // sorted ascending, no duplicates

    std::size_t num_examples() const { return features.rows(); }
    std::size_t feature_dim() const { return features.cols(); }
    std::size_t num_classes() const { return class_ids.size(); }
    std::size_t prototype_dim() const { return prototypes.cols(); }

    /// Position of a label in the canonical class order.
    std::size_t class_index(ClassId label) const {
        const auto it =
            std::lower_bound(class_ids.begin(), class_ids.end(), label);
        if (it == class_ids.end() || *it != label) {
            throw ingestion_error("unknown class label " +
                                  std::to_string(label));
        }
        return static_cast<std::size_t>(it - class_ids.begin());
    }

    /// Checks shared structural invariants; min_classes distinguishes roles.
    void validate(std::size_t min_classes = 2) const {
        if (features.rows() != labels.size()) {
            std::ostringstream what;
            what << "dataset: " << features.rows() << " feature rows but "
                 << labels.size() << " labels";
            throw ingestion_error(what.str());
        }
        if (!std::is_sorted(class_ids.begin(), class_ids.end()) ||
            std::adjacent_find(class_ids.begin(), class_ids.end()) !=
                class_ids.end()) {
            throw ingestion_error("dataset: class ids not sorted and unique");
        }
        if (prototypes.rows() != class_ids.size()) {
            std::ostringstream what;
            what << "dataset: " << class_ids.size() << " classes but "
                 << prototypes.rows() << " prototype rows";
            throw ingestion_error(what.str());
        }
        if (class_ids.size() < min_classes) {
            std::ostringstream what;
            what << "dataset: needs at least " << min_classes
                 << " classes, found " << class_ids.size();
            throw ingestion_error(what.str());
        }
        if (labels.size() < class_ids.size()) {
            throw ingestion_error("dataset: fewer examples than classes");
        }
        for (ClassId label : labels) {
            class_index(label); // throws on labels without a prototype row
        }
        if (!features.all_finite() || !prototypes.all_finite()) {
            throw numerical_error("dataset: non-finite feature or prototype "
                                  "values");
        }
    }
};

using SeenDataset = Dataset;
using UnseenDataset = Dataset;

/// Indices of examples carrying the given label.
inline std::vector<std::size_t> examples_of_class(const Dataset &data,
                                                  ClassId label) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
        if (data.labels[i] == label) {
            idx.push_back(i);
        }
    }
    return idx;
}

inline void require_disjoint_classes(const Dataset &seen,
                                     const Dataset &unseen) {
    std::set<ClassId> seen_ids(seen.class_ids.begin(), seen.class_ids.end());
    for (ClassId id : unseen.class_ids) {
        if (seen_ids.count(id) != 0) {
            throw ingestion_error("seen and unseen label spaces overlap at "
                                  "class " + std::to_string(id));
        }
    }
}

/** Per-feature standardization statistics computed from one dataset. */
struct FeatureStats {
    Vector mean;
    Vector scale; // standard deviation, floored at 1e-12
};

inline FeatureStats compute_feature_stats(const Matrix &features) {
    FeatureStats stats;
    stats.mean = row_mean(features);
    stats.scale.assign(features.cols(), 0.0);
    for (std::size_t r = 0; r < features.rows(); ++r) {
        const auto row = features.row(r);
        for (std::size_t c = 0; c < features.cols(); ++c) {
            const double d = row[c] - stats.mean[c];
            stats.scale[c] += d * d;
        }
    }
    for (std::size_t c = 0; c < features.cols(); ++c) {
        stats.scale[c] =
            std::max(std::sqrt(stats.scale[c] / features.rows()), 1e-12);
    }
    return stats;
}

inline void standardize_features(Matrix &features, const FeatureStats &stats) {
    if (features.cols() != stats.mean.size()) {
        throw dimension_error("standardize_features: dimension mismatch");
    }
    for (std::size_t r = 0; r < features.rows(); ++r) {
        auto row = features.row(r);
        for (std::size_t c = 0; c < features.cols(); ++c) {
            row[c] = (row[c] - stats.mean[c]) / stats.scale[c];
        }
    }
}

} // namespace ams

#endif // AMS_DATASET_HPP
