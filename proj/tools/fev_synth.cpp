// Synthetic FEV-style dataset generator (age, height, sex, smoking status,
// FEV).  The real childhood respiratory study data is not redistributed;
// this produces a same-schema stand-in for documentation and tests, with an
// age-kinked height effect so knot selection has something to find.
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <string>

namespace {

double uniform(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

double normal(std::mt19937_64& gen) {
  // Box-Muller on explicit uniforms (two draws per variate).
  double u1 = uniform(gen);
  while (u1 <= 0.0) u1 = uniform(gen);
  const double u2 = uniform(gen);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t n = 654;
  std::uint64_t seed = 1;
  std::string out = "fev_synth.csv";
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    auto next = [&]() -> const char* {
      if (i + 1 >= argc) {
        std::fprintf(stderr, "missing value for %s\n", arg.c_str());
        std::exit(2);
      }
      return argv[++i];
    };
    if (arg == "--n") n = std::strtoull(next(), nullptr, 10);
    else if (arg == "--seed") seed = std::strtoull(next(), nullptr, 10);
    else if (arg == "--out") out = next();
    else if (arg == "--help" || arg == "-h") {
      std::printf(
          "usage: vcqr-fev-synth [--n N] [--seed S] [--out FILE]\n"
          "Writes a synthetic CSV with columns fev,age,height,sex,smoke.\n");
      return 0;
    } else {
      std::fprintf(stderr, "unknown argument %s\n", arg.c_str());
      return 2;
    }
  }

  std::mt19937_64 gen(seed);
  std::ofstream file(out, std::ios::trunc);
  if (!file) {
    std::fprintf(stderr, "cannot write %s\n", out.c_str());
    return 3;
  }
  file << "fev,age,height,sex,smoke\n";
  char buf[160];
  for (std::size_t i = 0; i < n; ++i) {
    const double age = 3.0 + 16.0 * uniform(gen);
    const double sex = uniform(gen) < 0.5 ? 0.0 : 1.0;
    const double height = 41.0 + 1.7 * (age - 3.0) + 1.5 * sex +
                          (age > 12.0 && sex == 0.0 ? -0.8 * (age - 12.0) : 0.0) +
                          2.2 * normal(gen);
    const double smoke =
        (age >= 10.0 && uniform(gen) < 0.04 * (age - 9.0)) ? 1.0 : 0.0;
    // Height effect strengthens after age 10 (the kink), interaction mildly
    // so; smoking lowers FEV by a constant.
    const double beta_height = 0.045 + 0.010 * std::max(0.0, age - 10.0);
    const double beta_hs = 0.004 + 0.003 * std::max(0.0, age - 11.0);
    const double noise_sd = 0.25 + 0.030 * (age - 3.0);
    const double fev = -2.2 + 0.08 * age + beta_height * height +
                       beta_hs * height * sex - 0.18 * smoke +
                       noise_sd * normal(gen);
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%g,%g\n", fev, age, height,
                  sex, smoke);
    file << buf;
  }
  return 0;
}
