#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "asid/image.hpp"

namespace asid {

// One line per image path; '#' starts a comment. Relative entries are
// resolved against the manifest's own directory.
std::vector<std::string> read_manifest(const std::string& path);

struct PatchSample {
    Tensor lr; // [1,3,patch,patch]
    Tensor hr; // [1,3,patch*scale,patch*scale]
};

// Draws aligned random LR/HR patch pairs from a set of reference images.
// Each reference is cropped to a multiple of the scale, its LR counterpart
// derived by cubic downscaling once up front. Augmentation applies one of
// the 8 dihedral transforms, the same one to both patches. The draw order
// per sample is fixed (image, row, column, transform), so a seed pins the
// whole stream.
class PatchSampler {
  public:
    PatchSampler(std::vector<Image> references, int scale, int patch, bool augment,
                 std::uint64_t seed);

    PatchSample next(Dtype dt);

    // Stacks `batch` draws along the batch axis.
    std::pair<Tensor, Tensor> next_batch(int batch, Dtype dt);

    int image_count() const { return static_cast<int>(hr_.size()); }

  private:
    std::vector<Image> hr_, lr_;
    int scale_, patch_;
    bool augment_;
    std::mt19937_64 rng_;
};

} // namespace asid
