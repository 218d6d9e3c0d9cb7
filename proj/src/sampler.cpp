#include "asid/sampler.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "asid/errors.hpp"
#include "asid/ops.hpp"

namespace asid {

std::vector<std::string> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest '" + path + "'");
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        std::filesystem::path p(line.substr(first, last - first + 1));
        out.push_back(p.is_absolute() ? p.string() : (base / p).string());
    }
    return out;
}

PatchSampler::PatchSampler(std::vector<Image> references, int scale, int patch,
                           bool augment, std::uint64_t seed)
    : scale_(scale), patch_(patch), augment_(augment), rng_(seed) {
    if (scale < 1) throw ContractError("sampler scale must be at least 1");
    if (patch < 1) throw ContractError("sampler patch size must be at least 1");
    for (std::size_t i = 0; i < references.size(); ++i) {
        Image& hr = references[i];
        const int h = hr.height / scale * scale;
        const int w = hr.width / scale * scale;
        if (h / scale < patch || w / scale < patch) {
            std::cerr << "warning: skipping image " << i << " (" << hr.width << "x"
                      << hr.height << "), smaller than a " << patch * scale << "x"
                      << patch * scale << " reference patch\n";
            continue;
        }
        Image trimmed = (h == hr.height && w == hr.width) ? std::move(hr)
                                                          : crop(hr, 0, 0, h, w);
        lr_.push_back(bicubic_resize(trimmed, h / scale, w / scale));
        hr_.push_back(std::move(trimmed));
    }
    if (hr_.empty())
        throw DataError("no image is large enough for " +
                        std::to_string(patch * scale) + "x" +
                        std::to_string(patch * scale) + " patches");
}

PatchSample PatchSampler::next(Dtype dt) {
    const std::size_t idx = rng_() % hr_.size();
    const Image& lr = lr_[idx];
    const int y = static_cast<int>(rng_() % (lr.height - patch_ + 1));
    const int x = static_cast<int>(rng_() % (lr.width - patch_ + 1));
    Image lp = crop(lr, y, x, patch_, patch_);
    Image hp = crop(hr_[idx], y * scale_, x * scale_, patch_ * scale_, patch_ * scale_);
    if (augment_) {
        const int k = static_cast<int>(rng_() % 8);
        lp = dihedral(lp, k);
        hp = dihedral(hp, k);
    }
    return {image_to_tensor(lp, dt), image_to_tensor(hp, dt)};
}

std::pair<Tensor, Tensor> PatchSampler::next_batch(int batch, Dtype dt) {
    if (batch < 1) throw ContractError("batch size must be at least 1");
    std::vector<Tensor> lrs, hrs;
    lrs.reserve(batch);
    hrs.reserve(batch);
    for (int i = 0; i < batch; ++i) {
        PatchSample s = next(dt);
        lrs.push_back(std::move(s.lr));
        hrs.push_back(std::move(s.hr));
    }
    return {concat(lrs, 0), concat(hrs, 0)};
}

} // namespace asid
