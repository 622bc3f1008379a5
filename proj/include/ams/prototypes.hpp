#ifndef AMS_PROTOTYPES_HPP
#define AMS_PROTOTYPES_HPP

#include <algorithm>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ams/autoencoder.hpp"
#include "ams/dataset.hpp"
#include "ams/errors.hpp"
#include "ams/matrix.hpp"
#include "ams/solve.hpp"

namespace ams {

/** Per-class semantic prototypes split into the pre-defined part S^p and the
 * expanded part S^e. Rows are ordered by class_ids. */
struct PrototypeTable {
    std::vector<ClassId> class_ids;
    Matrix predefined; // m x n
    Matrix expanded;   // m x k

    std::size_t num_classes() const { return class_ids.size(); }
    std::size_t predefined_dim() const { return predefined.cols(); }
    std::size_t expanded_dim() const { return expanded.cols(); }

    /// Row [S^p_j | S^e_j] in the combined (n+k)-dimensional space.
    Vector combined_row(std::size_t j) const {
        const auto p = predefined.row(j);
        const auto e = expanded.row(j);
        Vector row;
        row.reserve(p.size() + e.size());
        row.assign(p.begin(), p.end());
        row.insert(row.end(), e.begin(), e.end());
        return row;
    }

    Matrix combined() const {
        Matrix all(num_classes(), predefined_dim() + expanded_dim());
        for (std::size_t j = 0; j < num_classes(); ++j) {
            const Vector row = combined_row(j);
            auto dst = all.row(j);
            std::copy(row.begin(), row.end(), dst.begin());
        }
        return all;
    }

    std::size_t index_of(ClassId label) const {
        const auto it =
            std::lower_bound(class_ids.begin(), class_ids.end(), label);
        if (it == class_ids.end() || *it != label) {
            throw ingestion_error("prototype table has no class " +
                                  std::to_string(label));
        }
        return static_cast<std::size_t>(it - class_ids.begin());
    }

    void validate() const {
        if (predefined.rows() != class_ids.size() ||
            expanded.rows() != class_ids.size()) {
            throw dimension_error("prototype table: " +
                                  std::to_string(class_ids.size()) +
                                  " classes against " +
                                  std::to_string(predefined.rows()) +
                                  " pre-defined and " +
                                  std::to_string(expanded.rows()) +
                                  " expanded rows");
        }
        if (!std::is_sorted(class_ids.begin(), class_ids.end()) ||
            std::adjacent_find(class_ids.begin(), class_ids.end()) !=
                class_ids.end()) {
            throw ingestion_error(
                "prototype table: class ids must be sorted and unique");
        }
        if (!predefined.all_finite() || !expanded.all_finite()) {
            throw numerical_error("prototype table contains non-finite values");
        }
    }
};

/** Expanded prototypes of the seen classes: S^e_j is the mean encoder output
 * over the training examples of class j. */
inline PrototypeTable expand_seen_prototypes(const AutoencoderModel &model,
                                             const SeenDataset &data) {
    data.validate();
    if (data.feature_dim() != model.input_dim()) {
        throw dimension_error("prototype expansion: feature dimension " +
                              std::to_string(data.feature_dim()) +
                              " does not match the model input dimension " +
                              std::to_string(model.input_dim()));
    }
    const std::size_t m = data.num_classes();
    const std::size_t k = model.latent_dim();

    PrototypeTable table;
    table.class_ids = data.class_ids;
    table.predefined = data.prototypes;
    table.expanded = Matrix(m, k);

    std::vector<std::size_t> counts(m, 0);
    for (std::size_t i = 0; i < data.num_examples(); ++i) {
        const std::size_t j = data.class_index(data.labels[i]);
        const Vector z = encode(model, data.features.row(i));
        auto dst = table.expanded.row(j);
        for (std::size_t c = 0; c < k; ++c) {
            dst[c] += z[c];
        }
        ++counts[j];
    }
    for (std::size_t j = 0; j < m; ++j) {
        if (counts[j] == 0) {
            throw ingestion_error("prototype expansion: class " +
                                  std::to_string(table.class_ids[j]) +
                                  " has no examples");
        }
        auto dst = table.expanded.row(j);
        for (std::size_t c = 0; c < k; ++c) {
            dst[c] /= static_cast<double>(counts[j]);
        }
    }
    return table;
}

/** One unseen class expressed as a least-squares mix of its g nearest seen
 * classes in the pre-defined semantic space. */
struct NeighborCombination {
    ClassId unseen_id = 0;
    std::vector<std::size_t> neighbor_indices; // rows into the seen table
    Vector coefficients;                       // theta, length g
    double residual = 0.0; // ||S^p_u - sum theta_i S^p_i||
};

/** Indices of the g seen prototypes nearest to `query` in Euclidean
 * distance. Ties break toward the smaller class id; the result is ordered by
 * (distance, class id). */
inline std::vector<std::size_t> find_neighbors(const PrototypeTable &seen,
                                               std::span<const double> query,
                                               std::size_t g) {
    if (g == 0 || g > seen.num_classes()) {
        throw parameter_error("neighbor search: g must be in [1, " +
                              std::to_string(seen.num_classes()) +
                              "], got " + std::to_string(g));
    }
    if (query.size() != seen.predefined_dim()) {
        throw dimension_error("neighbor search: query length " +
                              std::to_string(query.size()) +
                              " against pre-defined dimension " +
                              std::to_string(seen.predefined_dim()));
    }
    std::vector<std::pair<double, std::size_t>> ranked;
    ranked.reserve(seen.num_classes());
    for (std::size_t j = 0; j < seen.num_classes(); ++j) {
        ranked.emplace_back(euclidean_distance(seen.predefined.row(j), query),
                            j);
    }
    std::sort(ranked.begin(), ranked.end());
    std::vector<std::size_t> out(g);
    for (std::size_t i = 0; i < g; ++i) {
        out[i] = ranked[i].second;
    }
    return out;
}

/** Unconstrained least-squares coefficients theta minimizing
 * ||S^p_u - sum_i theta_i S^p_{neighbor_i}||. */
inline NeighborCombination
solve_combination(const PrototypeTable &seen, std::span<const double> query,
                  std::span<const std::size_t> neighbor_indices,
                  ClassId unseen_id) {
    if (neighbor_indices.empty()) {
        throw parameter_error("neighbor combination: empty neighbor set");
    }
    const std::size_t n = seen.predefined_dim();
    const std::size_t g = neighbor_indices.size();
    Matrix design(n, g);
    for (std::size_t i = 0; i < g; ++i) {
        if (neighbor_indices[i] >= seen.num_classes()) {
            throw dimension_error("neighbor combination: index " +
                                  std::to_string(neighbor_indices[i]) +
                                  " outside the seen table");
        }
        const auto proto = seen.predefined.row(neighbor_indices[i]);
        for (std::size_t r = 0; r < n; ++r) {
            design(r, i) = proto[r];
        }
    }
    Vector rhs(query.begin(), query.end());

    NeighborCombination combo;
    combo.unseen_id = unseen_id;
    combo.neighbor_indices.assign(neighbor_indices.begin(),
                                  neighbor_indices.end());
    combo.coefficients = least_squares(design, rhs);

    Vector fit = matvec(design, combo.coefficients);
    for (std::size_t r = 0; r < n; ++r) {
        fit[r] -= rhs[r];
    }
    combo.residual = l2_norm(fit);
    return combo;
}

/** Synthesizes expanded prototypes for unseen classes by transferring each
 * class's neighbor coefficients from the pre-defined space to the expanded
 * space: S^{e'}_u = sum_i theta_i S^e_{neighbor_i}.
 *
 * g defaults to min(5, seen classes) when zero. The combinations used are
 * returned alongside the table for inspection. */
inline std::pair<PrototypeTable, std::vector<NeighborCombination>>
synthesize_unseen_prototypes(const PrototypeTable &seen,
                             const Matrix &unseen_predefined,
                             std::span<const ClassId> unseen_ids,
                             std::size_t g = 0) {
    seen.validate();
    if (unseen_predefined.rows() != unseen_ids.size()) {
        throw dimension_error("prototype synthesis: " +
                              std::to_string(unseen_predefined.rows()) +
                              " prototype rows against " +
                              std::to_string(unseen_ids.size()) + " class ids");
    }
    if (unseen_ids.empty()) {
        throw parameter_error("prototype synthesis: no unseen classes");
    }
    if (unseen_predefined.cols() != seen.predefined_dim()) {
        throw dimension_error("prototype synthesis: pre-defined dimension " +
                              std::to_string(unseen_predefined.cols()) +
                              " against the seen table's " +
                              std::to_string(seen.predefined_dim()));
    }
    for (const ClassId id : unseen_ids) {
        if (std::binary_search(seen.class_ids.begin(), seen.class_ids.end(),
                               id)) {
            throw ingestion_error("prototype synthesis: class " +
                                  std::to_string(id) +
                                  " appears in both the seen and unseen sets");
        }
    }
    if (g == 0) {
        g = std::min<std::size_t>(5, seen.num_classes());
    }

    const std::size_t v = unseen_ids.size();
    const std::size_t k = seen.expanded_dim();

    std::vector<std::pair<ClassId, std::size_t>> order(v);
    for (std::size_t u = 0; u < v; ++u) {
        order[u] = {unseen_ids[u], u};
    }
    std::sort(order.begin(), order.end());
    for (std::size_t u = 1; u < v; ++u) {
        if (order[u].first == order[u - 1].first) {
            throw ingestion_error("prototype synthesis: duplicate unseen "
                                  "class " + std::to_string(order[u].first));
        }
    }

    PrototypeTable table;
    table.predefined = Matrix(v, unseen_predefined.cols());
    table.expanded = Matrix(v, k);
    std::vector<NeighborCombination> combos;
    combos.reserve(v);

    for (std::size_t j = 0; j < v; ++j) {
        const auto [id, src] = order[j];
        table.class_ids.push_back(id);
        const auto query = unseen_predefined.row(src);
        std::copy(query.begin(), query.end(), table.predefined.row(j).begin());

        const std::vector<std::size_t> neighbors =
            find_neighbors(seen, query, g);
        NeighborCombination combo =
            solve_combination(seen, query, neighbors, id);

        auto dst = table.expanded.row(j);
        for (std::size_t i = 0; i < neighbors.size(); ++i) {
            const auto e = seen.expanded.row(neighbors[i]);
            const double theta = combo.coefficients[i];
            for (std::size_t c = 0; c < k; ++c) {
                dst[c] += theta * e[c];
            }
        }
        combos.push_back(std::move(combo));
    }
    return {std::move(table), std::move(combos)};
}

} // namespace ams

#endif // AMS_PROTOTYPES_HPP
