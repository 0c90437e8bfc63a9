#include "gatgan/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "gatgan/errors.hpp"
#include "json.hpp"

namespace gatgan {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        const auto a = f.find_first_not_of(" \t");
        if (a == std::string::npos) {
            f.clear();
            continue;
        }
        const auto b = f.find_last_not_of(" \t");
        f = f.substr(a, b - a + 1);
    }
    return out;
}

bool parse_number(const std::string& field, double& out) {
    if (field.empty()) return false;
    const char* first = field.data();
    const char* last = first + field.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

bool is_numeric_row(const std::vector<std::string>& fields) {
    double v;
    for (const auto& f : fields) {
        if (!parse_number(f, v)) return false;
    }
    return true;
}

}  // namespace

RawSeries parse_csv_text(const std::string& text, HeaderMode header,
                         const std::string& origin) {
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    RawSeries out;
    out.source_path = origin;
    bool saw_header = false;
    bool first_content_line = true;

    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fields = split_fields(line);

        if (first_content_line) {
            first_content_line = false;
            const bool treat_as_header =
                header == HeaderMode::always ||
                (header == HeaderMode::automatic && !is_numeric_row(fields));
            if (treat_as_header) {
                if (header == HeaderMode::always && is_numeric_row(fields)) {
                    // Explicitly requested header line even if it looks numeric.
                }
                out.feature_names = fields;
                out.features = fields.size();
                saw_header = true;
                continue;
            }
        }

        if (out.features == 0) out.features = fields.size();
        if (fields.size() != out.features) {
            throw ParseError(origin + ":" + std::to_string(line_no) + ": row has " +
                             std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(out.features));
        }

        std::vector<double> row(fields.size());
        bool has_nan = false;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (!parse_number(fields[i], row[i])) {
                throw ParseError(origin + ":" + std::to_string(line_no) +
                                 ": non-numeric cell '" + fields[i] + "'");
            }
            if (std::isnan(row[i])) has_nan = true;
        }
        if (has_nan) {
            ++out.dropped_rows;
            continue;
        }
        out.values.insert(out.values.end(), row.begin(), row.end());
        ++out.steps;
    }

    if (out.steps == 0) {
        throw ParseError(origin + ": no data rows" + (saw_header ? " after header" : ""));
    }
    if (!saw_header) {
        out.feature_names.resize(out.features);
        for (std::size_t i = 0; i < out.features; ++i) {
            out.feature_names[i] = "f" + std::to_string(i);
        }
    }
    return out;
}

RawSeries load_csv(const std::string& path, HeaderMode header) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv_text(buf.str(), header, path);
}

std::string to_csv(const Tensor& windows, const std::vector<std::string>& feature_names) {
    if (windows.rank() != 3) {
        throw DimensionError("csv export expects [K,T,F], got " + shape_str(windows.shape()));
    }
    const std::size_t f = windows.shape()[2];
    if (feature_names.size() != f) {
        throw ContractError("csv export: " + std::to_string(feature_names.size()) +
                            " names for " + std::to_string(f) + " features");
    }
    std::ostringstream os;
    os << std::setprecision(17);
    for (std::size_t i = 0; i < f; ++i) os << (i ? "," : "") << feature_names[i];
    os << '\n';
    const auto v = windows.values();
    const std::size_t rows = windows.size() / f;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < f; ++i) os << (i ? "," : "") << v[r * f + i];
        os << '\n';
    }
    return os.str();
}

std::pair<RawSeries, NormalizationParams> minmax_normalize(const RawSeries& x) {
    if (x.steps == 0) throw ContractError("cannot normalize an empty series");
    NormalizationParams p;
    p.min.assign(x.features, std::numeric_limits<double>::infinity());
    p.max.assign(x.features, -std::numeric_limits<double>::infinity());
    for (std::size_t t = 0; t < x.steps; ++t) {
        for (std::size_t f = 0; f < x.features; ++f) {
            p.min[f] = std::min(p.min[f], x.at(t, f));
            p.max[f] = std::max(p.max[f], x.at(t, f));
        }
    }
    p.degenerate.resize(x.features);
    for (std::size_t f = 0; f < x.features; ++f) p.degenerate[f] = p.max[f] == p.min[f];
    return {normalize_with(x, p), p};
}

RawSeries normalize_with(const RawSeries& x, const NormalizationParams& params) {
    if (params.features() != x.features) {
        throw ContractError("normalization has " + std::to_string(params.features()) +
                            " features, series has " + std::to_string(x.features));
    }
    RawSeries out = x;
    for (std::size_t t = 0; t < x.steps; ++t) {
        for (std::size_t f = 0; f < x.features; ++f) {
            if (params.degenerate[f]) {
                out.at(t, f) = 0.5;
            } else {
                const double v = (x.at(t, f) - params.min[f]) / (params.max[f] - params.min[f]);
                out.at(t, f) = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return out;
}

Tensor denormalize(const Tensor& batch, const NormalizationParams& params) {
    if (batch.rank() != 3) {
        throw DimensionError("denormalize expects [K,T,F], got " + shape_str(batch.shape()));
    }
    const std::size_t f = batch.shape()[2];
    if (params.features() != f) {
        throw ContractError("normalization has " + std::to_string(params.features()) +
                            " features, batch has " + std::to_string(f));
    }
    Tensor out = batch.detached();
    auto v = out.values_mut();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::size_t j = i % f;
        v[i] = params.degenerate[j] ? params.min[j]
                                    : params.min[j] + v[i] * (params.max[j] - params.min[j]);
    }
    return out;
}

std::string params_to_json(const NormalizationParams& params,
                           const std::vector<std::string>& feature_names) {
    nlohmann::json j;
    j["min"] = params.min;
    j["max"] = params.max;
    j["degenerate"] = std::vector<int>(params.degenerate.begin(), params.degenerate.end());
    j["feature_names"] = feature_names;
    return j.dump(2);
}

NormalizationParams params_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("normalization sidecar: ") + e.what());
    }
    NormalizationParams p;
    try {
        p.min = j.at("min").get<std::vector<double>>();
        p.max = j.at("max").get<std::vector<double>>();
        const auto deg = j.at("degenerate").get<std::vector<int>>();
        p.degenerate.assign(deg.begin(), deg.end());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("normalization sidecar: ") + e.what());
    }
    if (p.min.size() != p.max.size() || p.min.size() != p.degenerate.size()) {
        throw ParseError("normalization sidecar: mismatched field lengths");
    }
    for (std::size_t i = 0; i < p.min.size(); ++i) {
        if (p.max[i] < p.min[i]) throw ParseError("normalization sidecar: max < min");
    }
    return p;
}

WindowedDataset window(const RawSeries& normalized, std::size_t tau, std::size_t stride,
                       NormalizationParams params) {
    if (tau == 0) throw ContractError("window length must be >= 1");
    if (stride == 0) throw ContractError("window stride must be >= 1");
    if (tau > normalized.steps) {
        throw ContractError("window length " + std::to_string(tau) + " exceeds series length " +
                            std::to_string(normalized.steps));
    }
    for (double v : normalized.values) {
        if (v < 0.0 || v > 1.0) {
            throw ContractError("windowing expects unit-range values; saw " +
                                std::to_string(v));
        }
    }

    const std::size_t k = (normalized.steps - tau) / stride + 1;
    WindowedDataset ds;
    ds.tau = tau;
    ds.stride = stride;
    ds.params = std::move(params);
    ds.windows = Tensor({k, tau, normalized.features});
    ds.start_indices.resize(k);
    auto dst = ds.windows.values_mut();
    std::size_t idx = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t start = i * stride;
        ds.start_indices[i] = start;
        for (std::size_t t = 0; t < tau; ++t) {
            for (std::size_t f = 0; f < normalized.features; ++f) {
                dst[idx++] = normalized.at(start + t, f);
            }
        }
    }
    return ds;
}

namespace {

WindowedDataset take_windows(const WindowedDataset& ds, const std::vector<std::size_t>& rows,
                             const std::string& tag) {
    const std::size_t tau = ds.tau, f = ds.windows.shape()[2];
    WindowedDataset out;
    out.tau = tau;
    out.stride = ds.stride;
    out.params = ds.params;
    out.split_tag = tag;
    out.windows = Tensor({rows.size(), tau, f});
    out.start_indices.reserve(rows.size());
    auto dst = out.windows.values_mut();
    const auto src = ds.windows.values();
    std::size_t idx = 0;
    for (std::size_t r : rows) {
        std::copy(src.begin() + r * tau * f, src.begin() + (r + 1) * tau * f,
                  dst.begin() + idx);
        idx += tau * f;
        out.start_indices.push_back(ds.start_indices[r]);
    }
    return out;
}

}  // namespace

std::pair<WindowedDataset, WindowedDataset> split(const WindowedDataset& ds,
                                                  double train_frac, SplitMode mode,
                                                  std::uint64_t seed) {
    if (!(train_frac > 0.0 && train_frac < 1.0)) {
        throw ContractError("train fraction must lie strictly between 0 and 1");
    }
    const std::size_t k = ds.count();
    if (k < 2) throw ContractError("need at least 2 windows to split");

    const auto target = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(k)));
    const std::size_t train_count = std::clamp<std::size_t>(target, 1, k - 1);

    std::vector<std::size_t> train_rows, test_rows;
    if (mode == SplitMode::shuffled) {
        std::vector<std::size_t> order(k);
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(seed);
        rng.shuffle(order);
        train_rows.assign(order.begin(), order.begin() + train_count);
        test_rows.assign(order.begin() + train_count, order.end());
        std::sort(train_rows.begin(), train_rows.end());
        std::sort(test_rows.begin(), test_rows.end());
    } else {
        // Boundary = first source step after the last training window; any
        // window overlapping both sides is dropped so no source step leaks.
        const std::size_t boundary = ds.start_indices[train_count - 1] + ds.tau;
        for (std::size_t i = 0; i < k; ++i) {
            if (i < train_count) {
                train_rows.push_back(i);
            } else if (ds.start_indices[i] >= boundary) {
                test_rows.push_back(i);
            }
        }
        if (test_rows.empty()) {
            throw ContractError("chronological split leaves no test windows; "
                                "reduce train fraction or stride overlap");
        }
    }

    return {take_windows(ds, train_rows, "train"), take_windows(ds, test_rows, "test")};
}

WindowedDataset toy_generator(ToyKind kind, std::size_t k, std::size_t tau, std::size_t f,
                              double noise, std::uint64_t seed) {
    if (k == 0 || tau == 0) throw ContractError("toy dataset needs k >= 1 and tau >= 1");
    if (noise < 0) throw ContractError("toy noise scale must be >= 0");
    Rng rng(seed);

    RawSeries raw;
    raw.features = f;
    raw.source_path = "<toy>";
    raw.feature_names.resize(f);
    for (std::size_t i = 0; i < f; ++i) raw.feature_names[i] = "f" + std::to_string(i);

    if (kind == ToyKind::coupled_sines) {
        if (f < 2) throw ContractError("coupled sines need at least 2 features");
        // One shared oscillation (fundamental + second harmonic); feature j
        // trails feature 0 by exactly 2*j samples. The longest lag needs
        // history, so generate that many extra leading samples.
        const std::size_t lead = 2 * (f - 1);
        const std::size_t total = k * tau;
        const double omega = 2.0 * 3.14159265358979323846 / 16.7;
        const double phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        std::vector<double> base(total + lead);
        for (std::size_t t = 0; t < base.size(); ++t) {
            const double a = omega * static_cast<double>(t) + phase;
            base[t] = std::sin(a) + 0.4 * std::sin(2.0 * a);
        }
        raw.steps = total;
        raw.values.resize(total * f);
        for (std::size_t t = 0; t < total; ++t) {
            for (std::size_t j = 0; j < f; ++j) {
                raw.at(t, j) = base[t + lead - 2 * j] + (noise > 0 ? rng.normal(0.0, noise) : 0.0);
            }
        }
    } else {
        // Stationary first-order vector autoregression with ring coupling.
        const std::size_t burn = 100;
        const std::size_t total = k * tau;
        const double innovation = std::max(noise, 0.05);
        std::vector<double> state(f), next(f);
        for (auto& s : state) s = rng.normal(0.0, 1.0);
        raw.steps = total;
        raw.values.resize(total * f);
        for (std::size_t t = 0; t < burn + total; ++t) {
            for (std::size_t j = 0; j < f; ++j) {
                const std::size_t prev = (j + f - 1) % f;
                next[j] = 0.7 * state[j] + 0.2 * state[prev] + rng.normal(0.0, innovation);
            }
            state = next;
            if (t >= burn) {
                for (std::size_t j = 0; j < f; ++j) raw.at(t - burn, j) = state[j];
            }
        }
    }

    auto [normalized, params] = minmax_normalize(raw);
    WindowedDataset ds = window(normalized, tau, tau, params);
    ds.split_tag = "toy";
    return ds;
}

}  // namespace gatgan
