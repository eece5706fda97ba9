#include "xray2vol/baselines.hpp"

#include <algorithm>
#include <limits>

#include "xray2vol/error.hpp"
#include "xray2vol/metrics.hpp"

namespace xray2vol {

BaselineIndex::BaselineIndex(std::vector<Entry> entries) : entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) { return a.id < b.id; });
}

BaselineIndex BaselineIndex::from_manifest(const DatasetManifest& m) {
    std::vector<Entry> entries;
    for (const Sample* s : m.select(Split::train))
        entries.push_back({s->id, load_image(m.resolve(s->image_path)), load_volume(m.resolve(s->volume_path))});
    return BaselineIndex(std::move(entries));
}

double mean_squared_difference(const Image& a, const Image& b) {
    if (a.width() != b.width() || a.height() != b.height()) throw InvalidInput("image dimension mismatch");
    auto da = a.data(), db = b.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < da.size(); ++i) {
        double d = static_cast<double>(da[i]) - db[i];
        acc += d * d;
    }
    return acc / static_cast<double>(da.size());
}

namespace {

template <typename Distance>
BaselineResult argmin(const BaselineIndex& index, Distance&& distance) {
    if (index.empty()) throw InvalidInput("baseline index is empty");
    const auto& entries = index.entries();
    const int n = static_cast<int>(entries.size());
    std::vector<double> d(n);
#pragma omp parallel for
    for (int i = 0; i < n; ++i) d[i] = distance(entries[i]);
    // Entries are id-sorted and min_element keeps the first minimum.
    auto best = std::min_element(d.begin(), d.end()) - d.begin();
    return {&entries[best], d[best]};
}

}  // namespace

BaselineResult nearest_neighbor(const Image& query, const BaselineIndex& index) {
    if (!index.empty()) {
        const Image& first = index.entries().front().image;
        if (first.width() != query.width() || first.height() != query.height())
            throw InvalidInput("nearest_neighbor: query dims do not match the index images");
    }
    return argmin(index, [&](const BaselineIndex::Entry& e) { return mean_squared_difference(query, e.image); });
}

BaselineResult oracle(const Volume& ground_truth, const BaselineIndex& index) {
    if (!index.empty() && index.entries().front().volume.dims() != ground_truth.dims())
        throw InvalidInput("oracle: ground truth dims do not match the index volumes");
    return argmin(index, [&](const BaselineIndex::Entry& e) { return volume_l2(ground_truth, e.volume); });
}

}  // namespace xray2vol
