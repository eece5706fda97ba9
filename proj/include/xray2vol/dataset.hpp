#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "xray2vol/geometry.hpp"
#include "xray2vol/image.hpp"
#include "xray2vol/projector.hpp"
#include "xray2vol/volume.hpp"

namespace xray2vol {

/// Deterministic skull-like phantom: a closed ellipsoidal shell filled with soft tissue,
/// hollowed by 1-4 cavities, braced by a lattice of thin dense plates and rods, with
/// 2-6 protrusions on the outside. Everything outside the object is exactly 0 and the
/// outer two voxel layers on every face are empty. Requires dims >= 8 on every axis.
Volume generate_phantom(std::uint64_t seed, Dims3 dims);

/// Draws view poses uniformly (in solid angle) from the z >= 0 hemisphere. Calls come in
/// pairs: the second call of each pair repeats the direction with the mirror flag set.
class ViewSampler {
public:
    explicit ViewSampler(std::uint64_t seed) : rng_(seed) {}
    ViewPose next();

private:
    std::mt19937_64 rng_;
    bool have_pending_ = false;
    Vec3 pending_{};
};

inline ViewPose sample_view(ViewSampler& state) { return state.next(); }

enum class Split { train, validation };

struct Sample {
    std::string id;
    std::string species_id;
    ViewPose pose;
    std::filesystem::path image_path;   ///< relative to the manifest directory
    std::filesystem::path volume_path;  ///< relative to the manifest directory
    Split split = Split::train;
};

struct DatasetManifest {
    ProjectorConfig projector;
    std::vector<Sample> samples;
    std::filesystem::path root;  ///< directory holding manifest.txt; relative paths resolve here

    std::size_t count(Split s) const;
    std::vector<const Sample*> select(Split s) const;
    std::filesystem::path resolve(const std::filesystem::path& rel) const { return root / rel; }
};

struct DatasetConfig {
    int n_species = 40;
    int views_per_species = 50;
    std::uint64_t seed = 1;
    int image_size = 64;
    int volume_size = 32;
    int phantom_size = 0;  ///< source phantom resolution; 0 means max(image_size, volume_size)
    double chi = 10.0;
    int n_steps = 128;
    double validation_fraction = 20.0 / 175.0;
};

/// Number of held-out species for a dataset of `n_species`.
int validation_species_count(int n_species, double fraction);

/// Renders every (species, view) pair into out_dir/images and out_dir/volumes and
/// writes out_dir/manifest.txt. On failure every file written so far is removed.
DatasetManifest build_dataset(const DatasetConfig& cfg, const std::filesystem::path& out_dir);

/// Line-oriented manifest: a "#xray2vol-manifest v1 chi=.. nsteps=.." header followed by
/// one key=value record per sample.
void write_manifest(const DatasetManifest& m, std::ostream& os);
DatasetManifest read_manifest(std::istream& is, const std::filesystem::path& root);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Loaded pixel and voxel data for one sample.
struct SamplePair {
    const Sample* sample = nullptr;
    Image image;
    Volume volume;
};
std::vector<SamplePair> load_split(const DatasetManifest& m, Split s);

}  // namespace xray2vol
