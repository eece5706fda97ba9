#include <cmath>
#include <fstream>
#include <limits>

#include "xray2vol/binary_io.hpp"
#include "xray2vol/error.hpp"
#include "xray2vol/net/network.hpp"

namespace xray2vol::nn::inline XRAY2VOL_NN_PRECISION {

namespace {

constexpr std::uint32_t kVersion = 1;
constexpr const char* kMetaName = "meta.config";
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

Tensor config_tensor(const NetworkConfig& cfg) {
    return Tensor({5}, std::vector<real>{static_cast<real>(cfg.input_size), static_cast<real>(cfg.min_resolution),
                                         static_cast<real>(cfg.base_channels), static_cast<real>(cfg.out_depth),
                                         static_cast<real>(cfg.blocks_per_stage)});
}

NetworkConfig config_from(const Tensor& t) {
    if (t.dims() != std::vector<int>{5}) throw TopologyError("meta.config has dims " + dims_string(t.dims()) + ", expected [5]");
    auto field = [&](std::size_t i) {
        const double v = t[i];
        if (!(v >= 1 && v <= 1 << 20) || v != std::floor(v)) throw TopologyError("meta.config holds an invalid value");
        return static_cast<int>(v);
    };
    NetworkConfig cfg{field(0), field(1), field(2), field(3), field(4)};
    try {
        cfg.validate();
    } catch (const InvalidInput& e) {
        throw TopologyError(std::string("meta.config: ") + e.what());
    }
    return cfg;
}

void write_tensor(io::Writer& w, const std::string& name, const Tensor& t) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) throw InvalidInput("tensor name too long: " + name);
    w.put(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.put(static_cast<std::uint8_t>(t.rank()));
    for (int d : t.dims()) w.put(static_cast<std::uint32_t>(d));
    const std::vector<float> f(t.data().begin(), t.data().end());
    w.floats(f);
}

std::vector<NamedTensor> read_tensors(std::istream& is) {
    io::Reader r(is);
    r.expect_magic("XNNW");
    const auto version = r.get<std::uint32_t>("version");
    if (version != kVersion) throw FormatError("unsupported XNNW version " + std::to_string(version), r.offset() - 4);
    const auto count = r.get<std::uint32_t>("tensor count");
    std::vector<NamedTensor> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = r.get<std::uint16_t>("tensor name length");
        std::string name = r.string(name_len, "tensor name");
        const std::uint64_t rank_offset = r.offset();
        const auto rank = r.get<std::uint8_t>("tensor rank");
        if (rank < 1 || rank > 4) throw FormatError("tensor '" + name + "' has invalid rank " + std::to_string(rank), rank_offset);
        std::vector<int> dims;
        std::uint64_t elements = 1;
        for (int d = 0; d < rank; ++d) {
            const auto v = r.get<std::uint32_t>("tensor dims");
            if (v == 0 || v > static_cast<std::uint32_t>(std::numeric_limits<int>::max()))
                throw FormatError("tensor '" + name + "' has invalid dimension " + std::to_string(v), r.offset() - 4);
            elements *= v;
            if (elements > kMaxElements) throw FormatError("tensor '" + name + "' is too large", r.offset() - 4);
            dims.push_back(static_cast<int>(v));
        }
        const auto left = r.remaining();
        if (left >= 0 && static_cast<std::uint64_t>(left) < elements * 4)
            throw FormatError("truncated payload of tensor '" + name + "' (" + std::to_string(left / 4) + " of " +
                                  std::to_string(elements) + " values present)",
                              r.offset() + static_cast<std::uint64_t>(left));
        std::vector<float> data(elements);
        r.floats(data, "tensor payload");
        out.push_back({std::move(name), Tensor(std::move(dims), std::vector<real>(data.begin(), data.end()))});
    }
    if (!r.at_end()) throw FormatError("trailing bytes after last tensor", r.offset());
    return out;
}

std::vector<NamedTensor> read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    try {
        return read_tensors(is);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.detail(), e.offset());
    }
}

LoadedWeights split_meta(std::vector<NamedTensor> tensors) {
    LoadedWeights out;
    bool have_meta = false;
    for (auto& t : tensors) {
        if (t.name == kMetaName) {
            out.config = config_from(t.value);
            have_meta = true;
        } else {
            out.weights.tensors.push_back(std::move(t));
        }
    }
    if (!have_meta) throw TopologyError("weights file has no meta.config tensor");
    check_topology(out.config, out.weights);
    return out;
}

}  // namespace

void write_weights(const NetworkConfig& cfg, const NetworkWeights& w, std::ostream& os) {
    check_topology(cfg, w);
    io::Writer out(os);
    out.magic("XNNW");
    out.put(kVersion);
    out.put(static_cast<std::uint32_t>(w.tensors.size() + 1));
    write_tensor(out, kMetaName, config_tensor(cfg));
    for (const auto& t : w.tensors) write_tensor(out, t.name, t.value);
    if (!out.ok()) throw std::runtime_error("write failed while writing weights");
}

void save_weights(const NetworkConfig& cfg, const NetworkWeights& w, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_weights(cfg, w, os);
    os.flush();
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

LoadedWeights read_weights(std::istream& is) { return split_meta(read_tensors(is)); }

LoadedWeights load_weights(const std::filesystem::path& path) { return split_meta(read_file(path)); }

NetworkWeights load_weights(const std::filesystem::path& path, const NetworkConfig& expected) {
    NetworkWeights w;
    for (auto& t : read_file(path))
        if (t.name != kMetaName) w.tensors.push_back(std::move(t));
    check_topology(expected, w);
    return w;
}

}  // namespace xray2vol::nn
