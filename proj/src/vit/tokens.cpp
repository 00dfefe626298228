#include "jepa_fer/vit/tokens.hpp"

#include <cmath>

#include "jepa_fer/error.hpp"

namespace jepa_fer::vit {

GridShape grid_for(std::size_t frames, std::size_t height, std::size_t width, const TubeletConfig& cfg) {
  if (cfg.patch_t == 0 || cfg.patch_h == 0 || cfg.patch_w == 0) throw ConfigError("tubelet extents must be positive");
  if (frames % cfg.patch_t || height % cfg.patch_h || width % cfg.patch_w || frames == 0 || height == 0 ||
      width == 0) {
    throw ConfigError("clip " + std::to_string(frames) + "x" + std::to_string(height) + "x" +
                      std::to_string(width) + " is not divisible into " + std::to_string(cfg.patch_t) +
                      "x" + std::to_string(cfg.patch_h) + "x" + std::to_string(cfg.patch_w) +
                      " tubelets");
  }
  return {frames / cfg.patch_t, height / cfg.patch_h, width / cfg.patch_w};
}

template <typename Real>
BasicTensor<Real> extract_tubelets(const data::FloatClip& clip, const TubeletConfig& cfg) {
  const auto grid = grid_for(clip.frames, clip.height, clip.width, cfg);
  const std::size_t vol = cfg.patch_volume();
  std::vector<Real> out(grid.tokens() * vol);
  std::size_t row = 0;
  for (std::size_t gt = 0; gt < grid.t; ++gt) {
    for (std::size_t gh = 0; gh < grid.h; ++gh) {
      for (std::size_t gw = 0; gw < grid.w; ++gw, ++row) {
        Real* dst = out.data() + row * vol;
        for (std::size_t dt = 0; dt < cfg.patch_t; ++dt) {
          const std::size_t t = gt * cfg.patch_t + dt;
          for (std::size_t dy = 0; dy < cfg.patch_h; ++dy) {
            const std::size_t y = gh * cfg.patch_h + dy;
            const float* src = clip.data.data() + ((t * clip.height + y) * clip.width + gw * cfg.patch_w) * 3;
            for (std::size_t i = 0; i < cfg.patch_w * 3; ++i) *dst++ = static_cast<Real>(src[i]);
          }
        }
      }
    }
  }
  return BasicTensor<Real>::from_values({grid.tokens(), vol}, std::move(out));
}

template <typename Real>
BasicTensor<Real> posembed_3d(const GridShape& grid, std::size_t dim) {
  if (dim == 0 || grid.tokens() == 0) throw ConfigError("posembed_3d: empty grid or dim");
  const std::size_t axis_dim = 2 * (dim / 6);
  const std::size_t half = axis_dim / 2;
  std::vector<Real> out(grid.tokens() * dim, Real(0));
  std::vector<double> omega(half);
  for (std::size_t i = 0; i < half; ++i) {
    omega[i] = 1.0 / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(half));
  }
  for (std::size_t t = 0; t < grid.t; ++t) {
    for (std::size_t h = 0; h < grid.h; ++h) {
      for (std::size_t w = 0; w < grid.w; ++w) {
        Real* row = out.data() + grid.index(t, h, w) * dim;
        const std::size_t pos[3] = {t, h, w};
        for (std::size_t a = 0; a < 3; ++a) {
          Real* block = row + a * axis_dim;
          for (std::size_t i = 0; i < half; ++i) {
            const double angle = static_cast<double>(pos[a]) * omega[i];
            block[i] = static_cast<Real>(std::sin(angle));
            block[half + i] = static_cast<Real>(std::cos(angle));
          }
        }
      }
    }
  }
  return BasicTensor<Real>::from_values({grid.tokens(), dim}, std::move(out));
}

std::size_t TubeMask::masked_spatial() const {
  std::size_t n = 0;
  for (auto m : spatial) n += m ? 1 : 0;
  return n;
}

std::vector<std::size_t> TubeMask::masked_tokens() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < grid.tokens(); ++i) {
    if (is_masked(i)) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> TubeMask::visible_tokens() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < grid.tokens(); ++i) {
    if (!is_masked(i)) out.push_back(i);
  }
  return out;
}

std::vector<std::uint8_t> TubeMask::token_mask() const {
  std::vector<std::uint8_t> out(grid.tokens());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = is_masked(i) ? 1 : 0;
  return out;
}

TubeMask gen_tube_mask(const GridShape& grid, const MaskConfig& cfg, Rng& rng) {
  if (!(cfg.ratio > 0.0 && cfg.ratio < 1.0)) throw ConfigError("mask ratio must lie in (0, 1)");
  if (cfg.block_h == 0 || cfg.block_w == 0 || cfg.block_h > grid.h || cfg.block_w > grid.w) {
    throw ConfigError("mask block " + std::to_string(cfg.block_h) + "x" + std::to_string(cfg.block_w) +
                      " does not fit the " + std::to_string(grid.h) + "x" + std::to_string(grid.w) +
                      " spatial grid");
  }
  const std::size_t cells = grid.spatial();
  if (cells < 2) throw ConfigError("spatial grid too small to keep a visible cell");
  auto target = static_cast<std::size_t>(std::ceil(cfg.ratio * static_cast<double>(cells) - 1e-9));
  target = std::clamp<std::size_t>(target, 1, cells - 1);

  TubeMask mask{grid, std::vector<std::uint8_t>(cells, 0)};
  std::size_t masked = 0;
  while (masked < target) {
    const auto top = static_cast<std::size_t>(rng.below(grid.h - cfg.block_h + 1));
    const auto left = static_cast<std::size_t>(rng.below(grid.w - cfg.block_w + 1));
    std::vector<std::size_t> fresh;
    for (std::size_t y = top; y < top + cfg.block_h; ++y) {
      for (std::size_t x = left; x < left + cfg.block_w; ++x) {
        if (!mask.spatial[y * grid.w + x]) fresh.push_back(y * grid.w + x);
      }
    }
    const bool whole = masked + fresh.size() <= cells - 1;
    for (auto cell : fresh) {
      if (!whole && masked >= target) break;
      mask.spatial[cell] = 1;
      ++masked;
    }
  }
  return mask;
}

template BasicTensor<float> extract_tubelets<float>(const data::FloatClip&, const TubeletConfig&);
template BasicTensor<double> extract_tubelets<double>(const data::FloatClip&, const TubeletConfig&);
template BasicTensor<float> posembed_3d<float>(const GridShape&, std::size_t);
template BasicTensor<double> posembed_3d<double>(const GridShape&, std::size_t);

}  // namespace jepa_fer::vit
