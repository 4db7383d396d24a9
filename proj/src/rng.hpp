#ifndef VCQR_RNG_HPP_
#define VCQR_RNG_HPP_

#include <cstdint>
#include <random>

namespace vcqr {

// Seeded random stream with per-replicate substreams.  A stream is fully
// determined by (seed, stream_id), so replicate r of a simulation draws the
// same numbers whether it runs serially or on a worker thread.
//
// All variates are derived from raw 64-bit draws of a std::mt19937_64 whose
// state is seeded through a splitmix64 mix of (seed, stream_id).  Uniforms
// and normals are generated explicitly (inverse CDF) rather than through
// std distributions, which are implementation-defined.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform();

  // Uniform on the open interval (0, 1); safe as an inverse-CDF argument.
  double uniform_open();

  double uniform(double lo, double hi);

  // Standard normal via the AS241 inverse CDF.
  double normal();

  // Uniform index in [0, n).
  std::size_t uniform_index(std::size_t n);

 private:
  std::mt19937_64 gen_;
};

// AS241 (Wichura) inverse standard normal CDF, |error| < 1e-14 on (0,1).
double inverse_normal_cdf(double p);

}  // namespace vcqr

#endif  // VCQR_RNG_HPP_
