#include "geocurate/dataset_ops.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "geocurate/error.hpp"
#include "geocurate/io.hpp"
#include "geocurate/parallel.hpp"

namespace geocurate {

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

// Exact decimal "0.96" -> (96, 100).
std::pair<std::uint64_t, std::uint64_t> parse_decimal(std::string_view s) {
    s = trim(s);
    std::uint64_t num = 0, den = 1;
    bool dot = false, digits = false;
    for (char c : s) {
        if (c == '.' && !dot) {
            dot = true;
        } else if (c >= '0' && c <= '9') {
            digits = true;
            num = num * 10 + std::uint64_t(c - '0');
            if (dot) den *= 10;
            if (den > 1'000'000'000'000ULL) throw ParseError("split ratio has too many digits");
        } else {
            throw ParseError("bad split ratio '" + std::string(s) + "'");
        }
    }
    if (!digits) throw ParseError("bad split ratio '" + std::string(s) + "'");
    return {num, den};
}

// Uniform integer in [0, bound) by rejection; identical on every platform.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t country_seed(std::uint64_t seed, std::string_view code) {
    std::uint64_t h = splitmix64(seed);
    for (unsigned char c : code) h = splitmix64(h ^ c);
    return h;
}

}  // namespace

SplitRatios parse_split_ratios(std::string_view text) {
    std::vector<std::string_view> parts;
    const char sep = text.find(':') != std::string_view::npos ? ':' : ',';
    std::size_t start = 0;
    for (;;) {
        auto pos = text.find(sep, start);
        parts.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    if (parts.size() != 3) throw ParseError("split ratios need three values (train, val, test)");
    std::pair<std::uint64_t, std::uint64_t> r[3];
    for (int i = 0; i < 3; ++i) r[i] = parse_decimal(parts[static_cast<std::size_t>(i)]);
    if (sep == ':') {
        if (r[0].second != 1 || r[1].second != 1 || r[2].second != 1)
            throw ParseError("split parts must be integers in 'a:b:c' form");
        SplitRatios out{r[0].first, r[1].first, r[2].first};
        if (out.denominator() == 0) throw ValidationError("split", "parts sum to zero");
        return out;
    }
    const std::uint64_t den = std::max({r[0].second, r[1].second, r[2].second});
    SplitRatios out{r[0].first * (den / r[0].second), r[1].first * (den / r[1].second), r[2].first * (den / r[2].second)};
    if (out.denominator() != den) throw ValidationError("split", "ratios must sum to exactly 1");
    return out;
}

SplitCounts split_counts(std::size_t n, const SplitRatios& r) {
    if (n == 0) return {};
    const std::uint64_t den = r.denominator();
    if (den == 0) throw ValidationError("split", "ratios sum to zero");
    const std::uint64_t room = n - 1;  // train keeps one
    const std::uint64_t test = std::min<std::uint64_t>(ceil_div(r.test * n, den), room);
    const std::uint64_t val = std::min<std::uint64_t>(ceil_div(r.val * n, den), room - test);
    return {n - test - val, val, test};
}

void split_dataset(std::span<ImageRecord> records, const SplitConfig& config, unsigned workers) {
    std::map<std::string, std::vector<std::size_t>> by_country;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!records[i].country_code) throw ValidationError("country_code", records[i].id + ": required for splitting");
        by_country[*records[i].country_code].push_back(i);
    }
    std::vector<std::pair<const std::string*, std::vector<std::size_t>*>> jobs;
    for (auto& [code, idx] : by_country) jobs.emplace_back(&code, &idx);

    parallel_for(jobs.size(), workers, [&](std::size_t j) {
        auto& idx = *jobs[j].second;
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return records[a].id < records[b].id; });
        std::mt19937_64 rng(country_seed(config.seed, *jobs[j].first));
        for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[uniform_below(rng, i)]);
        const auto counts = split_counts(idx.size(), config.ratios);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            records[idx[k]].split = k < counts.test                ? Split::test
                                    : k < counts.test + counts.val ? Split::val
                                                                   : Split::train;
        }
    });
}

const WeightEntry* WeightTable::find(int class_id) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), class_id,
                               [](const WeightEntry& e, int id) { return e.class_id < id; });
    return it != entries.end() && it->class_id == class_id ? &*it : nullptr;
}

WeightTable class_weights(const std::map<int, std::uint64_t>& counts) {
    WeightTable t;
    for (const auto& [id, n] : counts) {
        if (n == 0) {
            t.excluded.push_back(id);
            continue;
        }
        t.entries.push_back({id, n, 1.0 / std::sqrt(static_cast<double>(n))});
    }
    if (t.entries.empty()) throw ValidationError("counts", "every class count is zero");
    return t;
}

WeightTable rescale_mean_one(WeightTable t) {
    double sum = 0.0;
    for (const auto& e : t.entries) sum += e.weight;
    const double scale = static_cast<double>(t.entries.size()) / sum;
    for (auto& e : t.entries) e.weight *= scale;
    return t;
}

void write_weight_table(std::ostream& out, const WeightTable& t) {
    out << "# class weights w_i = 1/sqrt(n_i)\n";
    out << "# class_id n_i w_i\n";
    if (!t.excluded.empty()) {
        out << "# excluded (n_i = 0):";
        for (int id : t.excluded) out << ' ' << id;
        out << '\n';
    }
    char buf[64];
    for (const auto& e : t.entries) {
        std::snprintf(buf, sizeof buf, "%.17g", e.weight);
        out << e.class_id << ' ' << e.count << ' ' << buf << '\n';
    }
}

WeightTable read_weight_table(std::istream& in) {
    WeightTable t;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        auto body = trim(line);
        if (body.empty()) continue;
        if (body.front() == '#') {
            constexpr std::string_view tag = "# excluded (n_i = 0):";
            if (body.starts_with(tag)) {
                std::istringstream ss{std::string(body.substr(tag.size()))};
                for (int id; ss >> id;) t.excluded.push_back(id);
            }
            continue;
        }
        std::istringstream ss{std::string(body)};
        WeightEntry e;
        if (!(ss >> e.class_id >> e.count >> e.weight)) throw ParseError("expected 'class_id n_i w_i'", row);
        if (!t.entries.empty() && e.class_id <= t.entries.back().class_id)
            throw ParseError("class ids must ascend", row);
        t.entries.push_back(e);
    }
    return t;
}

void validate_loss_sample(const LossSample& s) {
    if (s.scores.empty()) throw ValidationError("scores", "empty score vector");
    if (s.true_class < 0 || static_cast<std::size_t>(s.true_class) >= s.scores.size())
        throw ValidationError("true_class", "out of range");
    double sum = 0.0;
    for (double p : s.scores) {
        if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("scores", "probability outside [0,1]");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ValidationError("scores", "probabilities do not sum to 1");
}

LossValue weighted_ce(const LossSample& s, const WeightTable& weights) {
    validate_loss_sample(s);
    const auto* w = weights.find(s.true_class);
    if (!w) throw ValidationError("true_class", "class " + std::to_string(s.true_class) + " has no weight");
    const double p = s.scores[static_cast<std::size_t>(s.true_class)];
    const bool clamped = p < kLossEpsilon;
    const double loss = p == 1.0 ? 0.0 : -w->weight * std::log(clamped ? kLossEpsilon : p);
    return {loss, clamped};
}

LossValue weighted_ce(std::span<const LossSample> batch, const WeightTable& weights) {
    LossValue total;
    for (const auto& s : batch) {
        auto v = weighted_ce(s, weights);
        total.value += v.value;
        total.clamped = total.clamped || v.clamped;
    }
    return total;
}

}  // namespace geocurate
