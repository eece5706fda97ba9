#include <doctest.h>

#include "support.hpp"
#include "xray2vol/baselines.hpp"
#include "xray2vol/error.hpp"
#include "xray2vol/evaluate.hpp"
#include "xray2vol/metrics.hpp"

using namespace xray2vol;

namespace {

BaselineIndex random_index(int n) {
    std::vector<BaselineIndex::Entry> e;
    for (int i = 0; i < n; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "s%03d", (i * 37) % n);
        e.push_back({id, testing::random_image(static_cast<std::uint64_t>(i), 8, 8), testing::random_volume(1000 + static_cast<std::uint64_t>(i), {4, 4, 4})});
    }
    return BaselineIndex(std::move(e));
}

template <typename Q, typename Dist>
std::string scan(const BaselineIndex& index, const Q& q, Dist dist) {
    std::string best;
    double best_d = 1e300;
    for (const auto& e : index.entries()) {
        double d = dist(e, q);
        if (d < best_d || (d == best_d && e.id < best)) {
            best_d = d;
            best = e.id;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("nearest neighbour and oracle match exhaustive scans") {
    BaselineIndex index = random_index(50);
    for (std::uint64_t s = 0; s < 20; ++s) {
        Image q = testing::random_image(500 + s, 8, 8);
        auto img_dist = [](const BaselineIndex::Entry& e, const Image& x) {
            double acc = 0;
            for (std::size_t i = 0; i < x.size(); ++i) acc += std::pow(e.image.data()[i] - x.data()[i], 2);
            return acc / static_cast<double>(x.size());
        };
        CHECK(nearest_neighbor(q, index).entry->id == scan(index, q, img_dist));
        Volume gt = testing::random_volume(900 + s, {4, 4, 4});
        auto vol_dist = [](const BaselineIndex::Entry& e, const Volume& x) { return volume_l2(e.volume, x); };
        CHECK(oracle(gt, index).entry->id == scan(index, gt, vol_dist));
        // The oracle minimizes the evaluation metric, so it never loses to the nearest neighbour.
        CHECK(volume_l2(oracle(gt, index).entry->volume, gt) <= volume_l2(nearest_neighbor(q, index).entry->volume, gt));
    }
}

TEST_CASE("self queries and ties") {
    BaselineIndex index = random_index(50);
    for (const auto& e : index.entries()) {
        BaselineResult n = nearest_neighbor(e.image, index);
        CHECK(n.distance == 0.0);
        CHECK(n.entry->volume == e.volume);
        BaselineResult o = oracle(e.volume, index);
        CHECK(o.distance == 0.0);
        CHECK(o.entry->id == e.id);
    }
    // All-zero query picks the lowest image energy.
    Image zero(8, 8);
    std::string expected;
    double best = 1e300;
    for (const auto& e : index.entries()) {
        double energy = 0;
        for (float v : e.image.data()) energy += v * v;
        if (energy < best) {
            best = energy;
            expected = e.id;
        }
    }
    CHECK(nearest_neighbor(zero, index).entry->id == expected);

    std::vector<BaselineIndex::Entry> twins{{"b", Image(2, 2, 0.5f), Volume({1, 1, 1}, 0.2f)}, {"a", Image(2, 2, 0.5f), Volume({1, 1, 1}, 0.2f)}};
    BaselineIndex tied(std::move(twins));
    CHECK(nearest_neighbor(Image(2, 2, 0.1f), tied).entry->id == "a");
    CHECK_THROWS_AS(nearest_neighbor(zero, BaselineIndex{}), InvalidInput);
}
