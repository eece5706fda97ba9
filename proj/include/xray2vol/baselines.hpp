#pragma once

#include <string>
#include <vector>

#include "xray2vol/dataset.hpp"

namespace xray2vol {

/// In-memory index over the train split of a manifest, sorted by sample id so that
/// ties resolve to the lowest id.
class BaselineIndex {
public:
    struct Entry {
        std::string id;
        Image image;
        Volume volume;
    };

    BaselineIndex() = default;
    explicit BaselineIndex(std::vector<Entry> entries);
    static BaselineIndex from_manifest(const DatasetManifest& m);

    const std::vector<Entry>& entries() const noexcept { return entries_; }
    bool empty() const noexcept { return entries_.empty(); }

private:
    std::vector<Entry> entries_;
};

struct BaselineResult {
    const BaselineIndex::Entry* entry = nullptr;
    double distance = 0;  ///< mean squared image distance (nn) or volume RMSE (oracle)
};

/// Train sample whose x-ray is closest (mean squared difference) to the query.
BaselineResult nearest_neighbor(const Image& query, const BaselineIndex& index);
/// Train sample whose volume is closest (volume_l2) to the ground truth.
BaselineResult oracle(const Volume& ground_truth, const BaselineIndex& index);

double mean_squared_difference(const Image& a, const Image& b);

}  // namespace xray2vol
