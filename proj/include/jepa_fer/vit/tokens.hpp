#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "jepa_fer/data/clips.hpp"
#include "jepa_fer/rng.hpp"
#include "jepa_fer/tensor.hpp"

namespace jepa_fer::vit {

/// Tubelet extents: patch_t frames x patch_h x patch_w pixels per token.
struct TubeletConfig {
  std::size_t patch_t = 2;
  std::size_t patch_h = 16;
  std::size_t patch_w = 16;

  std::size_t patch_volume() const { return patch_t * patch_h * patch_w * 3; }
};

/// Token grid extents (T', H', W').
struct GridShape {
  std::size_t t = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t tokens() const { return t * h * w; }
  std::size_t spatial() const { return h * w; }
  std::size_t index(std::size_t ti, std::size_t hi, std::size_t wi) const { return (ti * h + hi) * w + wi; }
  bool operator==(const GridShape&) const = default;
};

/// Grid for a clip; ConfigError unless every clip extent divides evenly.
GridShape grid_for(std::size_t frames, std::size_t height, std::size_t width, const TubeletConfig& cfg);

/// Flattens each non-overlapping tubelet (dt, dy, dx, c order) into one row,
/// rows in (t, h, w) order: (T'H'W') x (patch_t*patch_h*patch_w*3).
template <typename Real>
BasicTensor<Real> extract_tubelets(const data::FloatClip& clip, const TubeletConfig& cfg);

/// Fixed 3-D sinusoidal table, (T'H'W') x dim. dim splits into three equal
/// axis blocks (t, h, w) of 2*floor(dim/6) entries; each block holds
/// [sin(p*w_i) | cos(p*w_i)] with w_i = 10000^(-i/half). Leftover trailing
/// components are zero.
template <typename Real>
BasicTensor<Real> posembed_3d(const GridShape& grid, std::size_t dim);

/// Spatial mask replicated over every temporal index.
struct TubeMask {
  GridShape grid;
  std::vector<std::uint8_t> spatial;  // h*w, 1 = masked

  bool is_masked(std::size_t token) const { return spatial[token % grid.spatial()] != 0; }
  std::size_t masked_spatial() const;
  /// Token indices in canonical (t, h, w) order.
  std::vector<std::size_t> masked_tokens() const;
  std::vector<std::size_t> visible_tokens() const;
  /// One entry per token.
  std::vector<std::uint8_t> token_mask() const;
};

struct MaskConfig {
  double ratio = 0.75;
  std::size_t block_h = 4;
  std::size_t block_w = 4;
};

/// Places random block_h x block_w spatial blocks until at least
/// ceil(ratio * H'W') cells are masked. At least one cell always stays
/// visible: a block that would cover the remainder is added cell by cell
/// only up to the target.
TubeMask gen_tube_mask(const GridShape& grid, const MaskConfig& cfg, Rng& rng);

}  // namespace jepa_fer::vit
