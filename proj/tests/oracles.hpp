#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls into the library's numeric code.

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

struct ConvCase {
  std::size_t n, cin, h, w, cout, k, stride, pad, dil, groups;
  bool bias;
};

struct ConvResult {
  std::size_t ho = 0, wo = 0;
  std::vector<double> out;
  std::uint64_t macs = 0;  // every kernel tap of every output, padded taps included
};

// Nested-loop cross-correlation with zero padding. x is [n,cin,h,w], w is
// [cout, cin/groups, k, k].
template <class T>
ConvResult conv(const ConvCase& c, const std::vector<T>& x, const std::vector<T>& w,
                const std::vector<T>& b) {
  ConvResult r;
  const long span = static_cast<long>(c.dil * (c.k - 1) + 1);
  r.ho = static_cast<std::size_t>((static_cast<long>(c.h + 2 * c.pad) - span) / static_cast<long>(c.stride) + 1);
  r.wo = static_cast<std::size_t>((static_cast<long>(c.w + 2 * c.pad) - span) / static_cast<long>(c.stride) + 1);
  r.out.assign(c.n * c.cout * r.ho * r.wo, 0.0);
  const std::size_t cin_g = c.cin / c.groups, cout_g = c.cout / c.groups;
  for (std::size_t n = 0; n < c.n; ++n)
    for (std::size_t co = 0; co < c.cout; ++co) {
      const std::size_t g = co / cout_g;
      for (std::size_t oy = 0; oy < r.ho; ++oy)
        for (std::size_t ox = 0; ox < r.wo; ++ox) {
          double acc = c.bias ? static_cast<double>(b[co]) : 0.0;
          for (std::size_t ci = 0; ci < cin_g; ++ci)
            for (std::size_t ky = 0; ky < c.k; ++ky)
              for (std::size_t kx = 0; kx < c.k; ++kx) {
                ++r.macs;
                const long iy = static_cast<long>(oy * c.stride + ky * c.dil) - static_cast<long>(c.pad);
                const long ix = static_cast<long>(ox * c.stride + kx * c.dil) - static_cast<long>(c.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(c.h) || ix >= static_cast<long>(c.w)) continue;
                const std::size_t cc = g * cin_g + ci;
                acc += static_cast<double>(x[((n * c.cin + cc) * c.h + iy) * c.w + ix]) *
                       static_cast<double>(w[((co * cin_g + ci) * c.k + ky) * c.k + kx]);
              }
          r.out[((n * c.cout + co) * r.ho + oy) * r.wo + ox] = acc;
        }
    }
  // The loop above counts MACs for every sample; the cost formula is per image.
  r.macs /= c.n;
  return r;
}

// Random valid conv case with all extents <= 6.
inline ConvCase random_case(std::mt19937_64& rng) {
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  while (true) {
    ConvCase c{};
    c.n = pick(1, 2);
    c.groups = pick(1, 3);
    c.cin = c.groups * pick(1, 2);
    c.cout = c.groups * pick(1, 2);
    if (pick(0, 3) == 0) {  // depthwise
      c.cin = c.cout = c.groups = pick(1, 6);
    }
    c.h = pick(1, 6);
    c.w = pick(1, 6);
    c.k = pick(1, 3);
    c.stride = pick(1, 2);
    c.pad = pick(0, 2);
    c.dil = pick(1, 2);
    c.bias = pick(0, 1) == 1;
    if (c.cin > 6 || c.cout > 6) continue;
    const std::size_t span = c.dil * (c.k - 1) + 1;
    if (c.h + 2 * c.pad < span || c.w + 2 * c.pad < span) continue;
    return c;
  }
}

inline double gelu_tanh(double x) {
  const double pi = 3.14159265358979323846;
  return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / pi) * (x + 0.044715 * x * x * x)));
}

// Minimal CSV reader for "name,number,..." files; '#' lines are comments.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (t.header.empty()) t.header = fields;
    else t.rows.push_back(fields);
  }
  return t;
}

}  // namespace oracle
