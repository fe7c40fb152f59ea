#include "hcm/draws.hpp"

#include <algorithm>
#include <numeric>

#include "hcm/normal.hpp"
#include "hcm/random.hpp"

namespace hcm {

double halton_value(std::uint64_t index, unsigned base) {
    double f = 1.0, r = 0.0;
    while (index > 0) {
        f /= base;
        r += f * static_cast<double>(index % base);
        index /= base;
    }
    return r;
}

namespace {

void fill_halton(DrawMatrix& m, std::size_t row, std::size_t rank) {
    const auto R = static_cast<std::uint64_t>(m.R());
    for (int r = 0; r < m.R(); ++r) {
        const std::uint64_t index = 1 + kHaltonSkip + rank * R + static_cast<std::uint64_t>(r);
        m.at(row, r, 0) = norm_quantile(halton_value(index, 2));
        m.at(row, r, 1) = norm_quantile(halton_value(index, 3));
    }
}

void fill_stream(DrawMatrix& m, std::size_t row, RandomStream rng) {
    for (int r = 0; r < m.R(); ++r) {
        m.at(row, r, 0) = rng.normal();
        m.at(row, r, 1) = rng.normal();
    }
}

void check(const DrawConfig& c) {
    if (c.R < 1) throw ValidationError("number of draws must be at least 1");
}

}  // namespace

DrawMatrix generate_draws(const DrawConfig& config, std::size_t n_respondents) {
    check(config);
    DrawMatrix m(n_respondents, config.R);
    for (std::size_t q = 0; q < n_respondents; ++q) {
        if (config.scheme == DrawScheme::Halton) {
            fill_halton(m, q, q);
        } else {
            fill_stream(m, q, RandomStream(config.seed, static_cast<std::uint64_t>(q)));
        }
    }
    return m;
}

DrawMatrix generate_draws(const DrawConfig& config, const std::vector<std::string>& ids) {
    check(config);
    DrawMatrix m(ids.size(), config.R);
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ids[a] < ids[b]; });
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const std::size_t row = order[rank];
        if (config.scheme == DrawScheme::Halton) {
            fill_halton(m, row, rank);
        } else {
            fill_stream(m, row, RandomStream(config.seed, std::string_view(ids[row])));
        }
    }
    return m;
}

}  // namespace hcm
