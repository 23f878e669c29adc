#include "hypermix/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "hypermix/conformer.hpp"
#include "hypermix/error.hpp"
#include "hypermix/instrumentation.hpp"
#include "hypermix/rng.hpp"

namespace hypermix {

namespace {

// Timing runs pinned to one worker; restores the previous width on scope
// exit so tests and the CLI can keep their own settings.
class SingleThreadGuard {
  public:
    SingleThreadGuard() {
#ifdef _OPENMP
        saved_ = omp_get_max_threads();
        omp_set_num_threads(1);
#endif
    }
    ~SingleThreadGuard() {
#ifdef _OPENMP
        omp_set_num_threads(saved_);
#endif
    }

  private:
    int saved_ = 1;
};

std::vector<Tensor> make_inputs(const std::vector<i64>& lengths_seconds, u64 seed) {
    std::vector<Tensor> inputs;
    Rng rng(seed);
    for (i64 sec : lengths_seconds) {
        inputs.push_back(Tensor::randn({sec * kFramesPerSecond, 80}, rng, 1.0));
    }
    return inputs;
}

void bench_model(const EncoderConfig& cfg, ModelKind kind, const std::string& model_label,
                 const std::vector<i64>& lengths_seconds, const std::vector<Tensor>& inputs,
                 i64 repeats, Rng& param_rng, std::vector<BenchRecord>& out) {
    const i64 max_frames =
        subsampled_len(*std::max_element(lengths_seconds.begin(), lengths_seconds.end()) *
                       kFramesPerSecond);
    EncoderParams params = EncoderParams::init(cfg, kind, max_frames + 1, param_rng);

    for (size_t li = 0; li < lengths_seconds.size(); ++li) {
        const Tensor& input = inputs[li];
        for (i64 w = 0; w < kBenchWarmups; ++w) {
            Tensor sink = encoder_forward(input, params);
        }
        for (i64 r = 0; r < repeats; ++r) {
            Tensor sink;
            MeasureResult m = measure([&]() { sink = encoder_forward(input, params); });
            BenchRecord rec;
            rec.model = model_label;
            rec.gi_kind = gi_kind_name(model_gi_kind(kind));
            rec.heads = cfg.k;
            rec.d_model = cfg.d_model;
            rec.seq_seconds = lengths_seconds[li];
            rec.n_frames = subsampled_len(input.dim(0));
            rec.repeat_index = r;
            rec.duration_seconds = m.seconds;
            rec.peak_bytes = m.peak_bytes;
            rec.flops = m.flops;
            out.push_back(rec);
        }
    }
}

}  // namespace

std::vector<BenchRecord> run_scaling_bench(const EncoderConfig& cfg,
                                           const std::vector<ModelKind>& models,
                                           const std::vector<i64>& lengths_seconds, i64 repeats,
                                           u64 seed) {
    if (models.empty() || lengths_seconds.empty() || repeats < 1) {
        throw UsageError("scaling bench: need at least one model, one length, one repeat");
    }
    SingleThreadGuard pin;
    std::vector<Tensor> inputs = make_inputs(lengths_seconds, seed);
    Rng param_rng(seed);
    std::vector<BenchRecord> records;
    for (ModelKind kind : models) {
        bench_model(cfg, kind, model_name(kind), lengths_seconds, inputs, repeats, param_rng,
                    records);
    }
    return records;
}

std::vector<BenchRecord> run_head_bench(const EncoderConfig& cfg,
                                        const std::vector<i64>& lengths_seconds, i64 repeats,
                                        u64 seed) {
    if (lengths_seconds.empty() || repeats < 1) {
        throw UsageError("head bench: need at least one length and one repeat");
    }
    SingleThreadGuard pin;
    std::vector<Tensor> inputs = make_inputs(lengths_seconds, seed);
    std::vector<BenchRecord> records;
    for (i64 k : {static_cast<i64>(1), cfg.k}) {
        EncoderConfig kcfg = cfg;
        kcfg.k = k;
        validate(kcfg);
        Rng param_rng(seed);  // identical parameter seeding across k
        bench_model(kcfg, ModelKind::Hyperconformer,
                    model_name(ModelKind::Hyperconformer) + std::string("-k") + std::to_string(k),
                    lengths_seconds, inputs, repeats, param_rng, records);
    }
    return records;
}

double median(std::vector<double> xs) {
    if (xs.empty()) throw UsageError("median of an empty sample");
    std::sort(xs.begin(), xs.end());
    const size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

std::vector<BenchSummary> summarize(const std::vector<BenchRecord>& records) {
    std::vector<BenchSummary> out;
    for (const BenchRecord& r : records) {
        bool found = false;
        for (const BenchSummary& s : out) {
            if (s.model == r.model && s.seq_seconds == r.seq_seconds) {
                found = true;
                break;
            }
        }
        if (found) continue;
        std::vector<double> durations, peaks, flops;
        for (const BenchRecord& q : records) {
            if (q.model == r.model && q.seq_seconds == r.seq_seconds) {
                durations.push_back(q.duration_seconds);
                peaks.push_back(static_cast<double>(q.peak_bytes));
                flops.push_back(static_cast<double>(q.flops));
            }
        }
        BenchSummary s;
        s.model = r.model;
        s.seq_seconds = r.seq_seconds;
        s.median_duration = median(durations);
        s.peak_bytes = static_cast<i64>(median(peaks));
        s.flops = static_cast<i64>(median(flops));
        out.push_back(s);
    }
    return out;
}

namespace {

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

const char* model_color(const std::string& model) {
    if (model.find("hyperconformer") == 0) return "#9467bd";
    if (model.find("hypermixer") == 0) return "#2ca02c";
    if (model.find("conformer") == 0) return "#d62728";
    if (model.find("transformer") == 0) return "#1f77b4";
    return "#7f7f7f";
}

std::string svg_chart(const std::vector<BenchRecord>& records) {
    const std::vector<BenchSummary> sums = summarize(records);
    std::vector<std::string> models;
    std::vector<i64> lengths;
    double t_max = 0.0, p_max = 0.0;
    i64 x_min = sums.front().seq_seconds, x_max = sums.front().seq_seconds;
    for (const BenchSummary& s : sums) {
        if (std::find(models.begin(), models.end(), s.model) == models.end()) {
            models.push_back(s.model);
        }
        if (std::find(lengths.begin(), lengths.end(), s.seq_seconds) == lengths.end()) {
            lengths.push_back(s.seq_seconds);
        }
        t_max = std::max(t_max, s.median_duration);
        p_max = std::max(p_max, static_cast<double>(s.peak_bytes));
        x_min = std::min(x_min, s.seq_seconds);
        x_max = std::max(x_max, s.seq_seconds);
    }
    if (t_max <= 0.0) t_max = 1.0;
    if (p_max <= 0.0) p_max = 1.0;
    if (x_max == x_min) x_max = x_min + 1;

    const double W = 860, H = 520, L = 70, R = 790, T = 60, B = 450;
    auto xpos = [&](i64 sec) {
        return L + (R - L) * (static_cast<double>(sec - x_min) / static_cast<double>(x_max - x_min));
    };
    auto ypos_t = [&](double v) { return B - (B - T) * (v / (1.1 * t_max)); };
    auto ypos_p = [&](double v) { return B - (B - T) * (v / (1.1 * p_max)); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
        << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
        << "<text x=\"" << W / 2
        << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
        << "Forward wall time vs. sequence length (markers: peak bytes)</text>\n";

    // Axes.
    svg << "<line x1=\"" << L << "\" y1=\"" << B << "\" x2=\"" << R << "\" y2=\"" << B
        << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << B
        << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << R << "\" y1=\"" << T << "\" x2=\"" << R << "\" y2=\"" << B
        << "\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n";
    for (i64 sec : lengths) {
        svg << "<text x=\"" << xpos(sec) << "\" y=\"" << B + 20
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << sec
            << "s</text>\n";
    }
    for (int i = 0; i <= 4; ++i) {
        const double frac = 1.1 * static_cast<double>(i) / 4.0;
        std::ostringstream lt, lp;
        lt << std::setprecision(3) << frac * t_max;
        lp << std::setprecision(3) << frac * p_max / (1024.0 * 1024.0);
        const double y = B - (B - T) * (static_cast<double>(i) / 4.0) * 1.0;
        svg << "<text x=\"" << L - 8 << "\" y=\"" << y + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << lt.str()
            << "s</text>\n"
            << "<text x=\"" << R + 8 << "\" y=\"" << y + 4
            << "\" text-anchor=\"start\" font-family=\"sans-serif\" font-size=\"11\">" << lp.str()
            << "MB</text>\n";
    }

    double legend_x = L;
    for (const std::string& model : models) {
        const char* color = model_color(model);
        std::ostringstream line, marks;
        bool first = true;
        line << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (i64 sec : lengths) {
            for (const BenchSummary& s : sums) {
                if (s.model != model || s.seq_seconds != sec) continue;
                const double x = xpos(sec);
                line << (first ? "" : " ") << x << "," << ypos_t(s.median_duration);
                first = false;
                marks << "<circle cx=\"" << x << "\" cy=\"" << ypos_t(s.median_duration)
                      << "\" r=\"3.5\" fill=\"" << color << "\"/>\n"
                      << "<rect x=\"" << x - 3.5 << "\" y=\""
                      << ypos_p(static_cast<double>(s.peak_bytes)) - 3.5
                      << "\" width=\"7\" height=\"7\" fill=\"none\" stroke=\"" << color
                      << "\" stroke-width=\"1.5\"/>\n";
            }
        }
        line << "\"/>\n";
        svg << line.str() << marks.str();
        svg << "<rect x=\"" << legend_x << "\" y=\"" << H - 36
            << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n"
            << "<text x=\"" << legend_x + 18 << "\" y=\"" << H - 26
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << model << "</text>\n";
        legend_x += 24.0 + 8.0 * static_cast<double>(model.size());
    }
    svg << "<text x=\"" << L << "\" y=\"" << T - 10
        << "\" font-family=\"sans-serif\" font-size=\"11\">solid line + dot: median seconds "
        << "(left axis); hollow square: peak bytes (right axis)</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace

void emit_report(const std::vector<BenchRecord>& records, const std::string& out_base) {
    if (records.empty()) throw UsageError("report: no records to write");

    const std::string csv_path = out_base + ".csv";
    std::ofstream csv(csv_path, std::ios::binary);  // binary keeps LF endings everywhere
    if (!csv) throw Error("report: cannot write '" + csv_path + "'");
    csv << "model,gi_kind,heads,d_model,seq_seconds,n_frames,repeat,duration_seconds,peak_bytes,"
           "flops\n";
    for (const BenchRecord& r : records) {
        csv << r.model << ',' << r.gi_kind << ',' << r.heads << ',' << r.d_model << ','
            << r.seq_seconds << ',' << r.n_frames << ',' << r.repeat_index << ','
            << format_double(r.duration_seconds) << ',' << r.peak_bytes << ',' << r.flops << '\n';
    }
    csv.close();
    if (!csv) throw Error("report: cannot write '" + csv_path + "'");

    const std::string svg_path = out_base + ".svg";
    std::ofstream svg(svg_path, std::ios::binary);
    if (!svg) throw Error("report: cannot write '" + svg_path + "'");
    svg << svg_chart(records);
    svg.close();
    if (!svg) throw Error("report: cannot write '" + svg_path + "'");
}

std::vector<BenchRecord> parse_report_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("report: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) ||
        line !=
            "model,gi_kind,heads,d_model,seq_seconds,n_frames,repeat,duration_seconds,peak_bytes,"
            "flops") {
        throw InputError("report: '" + path + "' does not start with the expected header");
    }
    std::vector<BenchRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 10) {
            throw InputError("report: malformed row '" + line + "' in '" + path + "'");
        }
        BenchRecord r;
        r.model = fields[0];
        r.gi_kind = fields[1];
        r.heads = std::stoll(fields[2]);
        r.d_model = std::stoll(fields[3]);
        r.seq_seconds = std::stoll(fields[4]);
        r.n_frames = std::stoll(fields[5]);
        r.repeat_index = std::stoll(fields[6]);
        r.duration_seconds = std::stod(fields[7]);
        r.peak_bytes = std::stoll(fields[8]);
        r.flops = std::stoll(fields[9]);
        out.push_back(r);
    }
    return out;
}

}  // namespace hypermix
