#include "xray2vol/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>

#include "xray2vol/error.hpp"

namespace xray2vol {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::string pad(int value, int width) {
    std::string s = std::to_string(value);
    return std::string(std::max(0, width - static_cast<int>(s.size())), '0') + s;
}

std::string shortest(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

}  // namespace

std::size_t DatasetManifest::count(Split s) const {
    return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(), [&](const Sample& x) { return x.split == s; }));
}

std::vector<const Sample*> DatasetManifest::select(Split s) const {
    std::vector<const Sample*> out;
    for (const Sample& x : samples)
        if (x.split == s) out.push_back(&x);
    return out;
}

int validation_species_count(int n_species, double fraction) {
    if (n_species < 2) return 0;
    int k = static_cast<int>(std::floor(n_species * fraction + 1e-9));
    return std::clamp(k, 1, n_species - 1);
}

DatasetManifest build_dataset(const DatasetConfig& cfg, const std::filesystem::path& out_dir) {
    if (cfg.n_species < 1 || cfg.views_per_species < 1) throw InvalidInput("build_dataset: need at least one species and view");
    if (cfg.image_size < 1 || cfg.volume_size < 8) throw InvalidInput("build_dataset: image size >= 1 and volume size >= 8 required");
    const int phantom_size = cfg.phantom_size > 0 ? cfg.phantom_size : std::max(cfg.image_size, cfg.volume_size);

    DatasetManifest m;
    m.root = out_dir;
    m.projector = {cfg.chi, cfg.n_steps, cfg.image_size, cfg.image_size};
    m.projector.validate();

    std::vector<int> order(cfg.n_species);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 split_rng(splitmix64(cfg.seed ^ 0x5151u));
    std::shuffle(order.begin(), order.end(), split_rng);
    const int n_val = validation_species_count(cfg.n_species, cfg.validation_fraction);
    std::vector<bool> is_val(cfg.n_species, false);
    for (int i = 0; i < n_val; ++i) is_val[order[i]] = true;

    for (int s = 0; s < cfg.n_species; ++s) {
        ViewSampler sampler(splitmix64(cfg.seed * 1000003ull + 2 * s + 1));
        const std::string species = "sp" + pad(s, 3);
        for (int k = 0; k < cfg.views_per_species; ++k) {
            Sample x;
            x.id = species + "_v" + pad(k, 4);
            x.species_id = species;
            x.pose = sample_view(sampler);
            x.image_path = std::filesystem::path("images") / (x.id + ".ximg");
            x.volume_path = std::filesystem::path("volumes") / (x.id + ".xvol");
            x.split = is_val[s] ? Split::validation : Split::train;
            m.samples.push_back(std::move(x));
        }
    }

    std::vector<std::filesystem::path> written;
    std::mutex written_mutex;
    auto cleanup = [&] {
        std::error_code ec;
        for (const auto& p : written) std::filesystem::remove(p, ec);
        std::filesystem::remove(out_dir / "manifest.txt", ec);
    };

    try {
        std::filesystem::create_directories(out_dir / "images");
        std::filesystem::create_directories(out_dir / "volumes");

        std::vector<Volume> phantoms(cfg.n_species);
        for (int s = 0; s < cfg.n_species; ++s)
            phantoms[s] = generate_phantom(splitmix64(cfg.seed ^ (0xabcdull * (s + 1))), {phantom_size, phantom_size, phantom_size});

        const Dims3 vol_dims{cfg.volume_size, cfg.volume_size, cfg.volume_size};
        const int n = static_cast<int>(m.samples.size());
        std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < n; ++i) {
            if (failure) continue;
            try {
                const Sample& x = m.samples[i];
                const Volume& phantom = phantoms[static_cast<std::size_t>(i / cfg.views_per_species)];
                Image img = project(phantom, x.pose, m.projector);
                Volume aligned = rotate_to_view(phantom, x.pose, phantom.dims());
                if (aligned.dims() != vol_dims) aligned = resample_gaussian(aligned, vol_dims);
                save_image(img, out_dir / x.image_path);
                {
                    std::lock_guard lock(written_mutex);
                    written.push_back(out_dir / x.image_path);
                }
                save_volume(aligned, out_dir / x.volume_path);
                {
                    std::lock_guard lock(written_mutex);
                    written.push_back(out_dir / x.volume_path);
                }
            } catch (...) {
#pragma omp critical
                if (!failure) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);
        save_manifest(m, out_dir / "manifest.txt");
    } catch (...) {
        cleanup();
        throw;
    }
    return m;
}

void write_manifest(const DatasetManifest& m, std::ostream& os) {
    os << "#xray2vol-manifest v1 chi=" << shortest(m.projector.chi) << " nsteps=" << m.projector.n_steps
       << " width=" << m.projector.width << " height=" << m.projector.height << '\n';
    for (const Sample& x : m.samples) {
        os << "id=" << x.id << " species=" << x.species_id << " dir=" << shortest(x.pose.direction.x) << ','
           << shortest(x.pose.direction.y) << ',' << shortest(x.pose.direction.z) << " mirror=" << (x.pose.mirrored ? 1 : 0)
           << " split=" << (x.split == Split::train ? "train" : "val") << " image=" << x.image_path.generic_string()
           << " volume=" << x.volume_path.generic_string() << '\n';
    }
}

namespace {

std::map<std::string, std::string> parse_pairs(const std::string& line, std::uint64_t offset) {
    std::map<std::string, std::string> kv;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0) throw FormatError("malformed manifest token '" + tok + "'", offset);
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return kv;
}

double parse_double(const std::string& s, std::uint64_t offset) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw FormatError("bad number '" + s + "' in manifest", offset);
    return v;
}

int parse_int(const std::string& s, std::uint64_t offset) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw FormatError("bad integer '" + s + "' in manifest", offset);
    return v;
}

const std::string& require(const std::map<std::string, std::string>& kv, const char* key, std::uint64_t offset) {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(std::string("manifest record missing '") + key + "'", offset);
    return it->second;
}

}  // namespace

DatasetManifest read_manifest(std::istream& is, const std::filesystem::path& root) {
    DatasetManifest m;
    m.root = root;
    std::string line;
    std::uint64_t offset = 0;
    if (!std::getline(is, line)) throw FormatError("empty manifest", 0);
    const std::string header = "#xray2vol-manifest v1";
    if (line.rfind(header, 0) != 0) throw FormatError("bad manifest header", 0);
    {
        auto kv = parse_pairs(line.substr(header.size()), offset);
        m.projector.chi = parse_double(require(kv, "chi", offset), offset);
        m.projector.n_steps = parse_int(require(kv, "nsteps", offset), offset);
        if (kv.count("width")) m.projector.width = parse_int(kv["width"], offset);
        if (kv.count("height")) m.projector.height = parse_int(kv["height"], offset);
    }
    offset += line.size() + 1;
    for (; std::getline(is, line); offset += line.size() + 1) {
        if (line.empty() || line[0] == '#') continue;
        auto kv = parse_pairs(line, offset);
        Sample x;
        x.id = require(kv, "id", offset);
        x.species_id = require(kv, "species", offset);
        const std::string& dir = require(kv, "dir", offset);
        auto c1 = dir.find(','), c2 = dir.find(',', c1 == std::string::npos ? c1 : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) throw FormatError("bad direction '" + dir + "'", offset);
        Vec3 d{parse_double(dir.substr(0, c1), offset), parse_double(dir.substr(c1 + 1, c2 - c1 - 1), offset),
               parse_double(dir.substr(c2 + 1), offset)};
        const std::string& mirror = require(kv, "mirror", offset);
        if (mirror != "0" && mirror != "1") throw FormatError("bad mirror flag '" + mirror + "'", offset);
        x.pose = make_pose(d, mirror == "1");
        const std::string& split = require(kv, "split", offset);
        if (split == "train") x.split = Split::train;
        else if (split == "val") x.split = Split::validation;
        else throw FormatError("bad split '" + split + "'", offset);
        x.image_path = require(kv, "image", offset);
        x.volume_path = require(kv, "volume", offset);
        m.samples.push_back(std::move(x));
    }
    return m;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_manifest(m, os);
    os.flush();
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    try {
        return read_manifest(is, path.parent_path());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.detail(), e.offset());
    }
}

std::vector<SamplePair> load_split(const DatasetManifest& m, Split s) {
    std::vector<SamplePair> out;
    for (const Sample* x : m.select(s)) out.push_back({x, load_image(m.resolve(x->image_path)), load_volume(m.resolve(x->volume_path))});
    return out;
}

}  // namespace xray2vol
