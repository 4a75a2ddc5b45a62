#include "usmt/analysis/render.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "usmt/data/png_io.hpp"

namespace usmt {
namespace analysis {

namespace {

// ---- 5x7 bitmap font (column bytes, LSB = top row) ----

struct Glyph {
    char ch;
    uint8_t col[5];
};

constexpr Glyph kFont[] = {
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00}}, {'-', {0x08, 0x08, 0x08, 0x08, 0x08}},
    {'.', {0x00, 0x60, 0x60, 0x00, 0x00}}, {'%', {0x23, 0x13, 0x08, 0x64, 0x62}},
    {'+', {0x08, 0x08, 0x3E, 0x08, 0x08}}, {'/', {0x20, 0x10, 0x08, 0x04, 0x02}},
    {'_', {0x40, 0x40, 0x40, 0x40, 0x40}}, {'(', {0x00, 0x1C, 0x22, 0x41, 0x00}},
    {')', {0x00, 0x41, 0x22, 0x1C, 0x00}}, {':', {0x00, 0x36, 0x36, 0x00, 0x00}},
    {'=', {0x14, 0x14, 0x14, 0x14, 0x14}}, {'#', {0x14, 0x7F, 0x14, 0x7F, 0x14}},
    {'?', {0x02, 0x01, 0x51, 0x09, 0x06}},
    {'0', {0x3E, 0x51, 0x49, 0x45, 0x3E}}, {'1', {0x00, 0x42, 0x7F, 0x40, 0x00}},
    {'2', {0x42, 0x61, 0x51, 0x49, 0x46}}, {'3', {0x21, 0x41, 0x45, 0x4B, 0x31}},
    {'4', {0x18, 0x14, 0x12, 0x7F, 0x10}}, {'5', {0x27, 0x45, 0x45, 0x45, 0x39}},
    {'6', {0x3C, 0x4A, 0x49, 0x49, 0x30}}, {'7', {0x01, 0x71, 0x09, 0x05, 0x03}},
    {'8', {0x36, 0x49, 0x49, 0x49, 0x36}}, {'9', {0x06, 0x49, 0x49, 0x29, 0x1E}},
    {'A', {0x7E, 0x11, 0x11, 0x11, 0x7E}}, {'B', {0x7F, 0x49, 0x49, 0x49, 0x36}},
    {'C', {0x3E, 0x41, 0x41, 0x41, 0x22}}, {'D', {0x7F, 0x41, 0x41, 0x22, 0x1C}},
    {'E', {0x7F, 0x49, 0x49, 0x49, 0x41}}, {'F', {0x7F, 0x09, 0x09, 0x09, 0x01}},
    {'G', {0x3E, 0x41, 0x49, 0x49, 0x7A}}, {'H', {0x7F, 0x08, 0x08, 0x08, 0x7F}},
    {'I', {0x00, 0x41, 0x7F, 0x41, 0x00}}, {'J', {0x20, 0x40, 0x41, 0x3F, 0x01}},
    {'K', {0x7F, 0x08, 0x14, 0x22, 0x41}}, {'L', {0x7F, 0x40, 0x40, 0x40, 0x40}},
    {'M', {0x7F, 0x02, 0x0C, 0x02, 0x7F}}, {'N', {0x7F, 0x04, 0x08, 0x10, 0x7F}},
    {'O', {0x3E, 0x41, 0x41, 0x41, 0x3E}}, {'P', {0x7F, 0x09, 0x09, 0x09, 0x06}},
    {'Q', {0x3E, 0x41, 0x51, 0x21, 0x5E}}, {'R', {0x7F, 0x09, 0x19, 0x29, 0x46}},
    {'S', {0x46, 0x49, 0x49, 0x49, 0x31}}, {'T', {0x01, 0x01, 0x7F, 0x01, 0x01}},
    {'U', {0x3F, 0x40, 0x40, 0x40, 0x3F}}, {'V', {0x1F, 0x20, 0x40, 0x20, 0x1F}},
    {'W', {0x3F, 0x40, 0x38, 0x40, 0x3F}}, {'X', {0x63, 0x14, 0x08, 0x14, 0x63}},
    {'Y', {0x07, 0x08, 0x70, 0x08, 0x07}}, {'Z', {0x61, 0x51, 0x49, 0x45, 0x43}},
};

const uint8_t* glyph_for(char c) {
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (const auto& g : kFont)
        if (g.ch == c) return g.col;
    return glyph_for('?');
}

struct Rgb {
    uint8_t r, g, b;
};

struct Canvas {
    int w, h;
    std::vector<uint8_t> px;  // rgb rows

    Canvas(int width, int height, Rgb bg)
        : w(width), h(height), px(static_cast<size_t>(width) * height * 3) {
        for (int i = 0; i < w * h; ++i) set(i % w, i / w, bg);
    }

    void set(int x, int y, Rgb c) {
        if (x < 0 || x >= w || y < 0 || y >= h) return;
        size_t o = (static_cast<size_t>(y) * w + x) * 3;
        px[o] = c.r;
        px[o + 1] = c.g;
        px[o + 2] = c.b;
    }

    void fill_rect(int x0, int y0, int rw, int rh, Rgb c) {
        for (int y = y0; y < y0 + rh; ++y)
            for (int x = x0; x < x0 + rw; ++x) set(x, y, c);
    }

    void frame_rect(int x0, int y0, int rw, int rh, Rgb c) {
        for (int x = x0; x < x0 + rw; ++x) {
            set(x, y0, c);
            set(x, y0 + rh - 1, c);
        }
        for (int y = y0; y < y0 + rh; ++y) {
            set(x0, y, c);
            set(x0 + rw - 1, y, c);
        }
    }

    void text(int x0, int y0, const std::string& s, Rgb c, int scale = 1) {
        int x = x0;
        for (char ch : s) {
            const uint8_t* cols = glyph_for(ch);
            for (int cx = 0; cx < 5; ++cx)
                for (int cy = 0; cy < 7; ++cy)
                    if (cols[cx] & (1 << cy))
                        fill_rect(x + cx * scale, y0 + cy * scale, scale, scale, c);
            x += 6 * scale;
        }
    }

    static int text_width(const std::string& s, int scale = 1) {
        return static_cast<int>(s.size()) * 6 * scale;
    }

    void save(const std::string& path) const {
        ImageU8 img;
        img.channels = 3;
        img.width = w;
        img.height = h;
        img.data = px;
        write_png(path, img);
    }
};

constexpr Rgb kWhite{255, 255, 255};
constexpr Rgb kBlack{20, 20, 20};
constexpr Rgb kGrid{120, 120, 120};

// diverging map: red for degradation, blue for improvement, white at zero
Rgb delta_color(double pct) {
    double t = std::clamp(pct / 50.0, -1.0, 1.0);
    if (t >= 0) {
        auto s = static_cast<uint8_t>(255 - t * 165);
        return Rgb{s, s, 255};
    }
    auto s = static_cast<uint8_t>(255 + t * 165);
    return Rgb{255, s, s};
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

void render_delta_csv(const DeltaReport& report, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << "# mode=" << delta_mode_name(report.mode) << " baseline="
      << report.baseline_paradigm << " other=" << report.other_paradigm << "\n";
    f << "task_id,group,metric,direction,ts_value,other_value,delta_absolute,delta_percent\n";
    for (const auto& e : report.per_task) {
        f << csv_escape(e.task_id) << "," << csv_escape(e.group) << "," << e.metric << ","
          << metrics::direction_name(e.direction) << "," << fmt6(e.ts_value) << ","
          << fmt6(e.other_value) << "," << fmt6(e.delta_absolute) << ",";
        if (e.delta_percent) f << fmt6(*e.delta_percent);
        f << "\n";
    }
}

std::vector<DeltaEntry> parse_delta_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read " + path);
    std::string line;
    std::vector<DeltaEntry> out;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("task_id,", 0) == 0) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() < 7) throw ValidationError(path + ": short CSV row '" + line + "'");
        DeltaEntry e;
        e.task_id = fields[0];
        e.group = fields[1];
        e.metric = fields[2];
        e.direction = fields[3] == "lower_better" ? metrics::Direction::lower_better
                                                  : metrics::Direction::higher_better;
        e.ts_value = std::strtod(fields[4].c_str(), nullptr);
        e.other_value = std::strtod(fields[5].c_str(), nullptr);
        e.delta_absolute = std::strtod(fields[6].c_str(), nullptr);
        if (fields.size() > 7 && !fields[7].empty())
            e.delta_percent = std::strtod(fields[7].c_str(), nullptr);
        out.push_back(std::move(e));
    }
    return out;
}

void render_delta_md(const DeltaReport& report, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << "# Performance change vs " << report.baseline_paradigm << " (mode: "
      << delta_mode_name(report.mode) << ", compared paradigm: " << report.other_paradigm
      << ")\n\n";
    f << "| Task | Group | Metric | " << report.baseline_paradigm << " | "
      << report.other_paradigm << " | Delta (abs) | Delta (%) |\n";
    f << "|---|---|---|---|---|---|---|\n";
    for (const auto& e : report.per_task) {
        f << "| " << e.task_id << " | " << e.group << " | " << e.metric << " | "
          << fmt6(e.ts_value) << " | " << fmt6(e.other_value) << " | "
          << fmt6(e.delta_absolute) << " | "
          << (e.delta_percent ? fmt6(*e.delta_percent) : std::string("n/a")) << " |\n";
    }
    f << "\n| Group | #Tasks | Mean delta (" << delta_mode_name(report.mode) << ") |\n";
    f << "|---|---|---|\n";
    for (const auto& g : report.per_group) {
        double v = report.mode == DeltaMode::percent ? *g.mean_percent : g.mean_absolute;
        f << "| " << g.group << " | " << g.n_tasks << " | " << fmt6(v)
          << (g.mixed_metrics ? " (mixed metrics)" : "") << " |\n";
    }
}

void render_metric_csv(const metrics::MetricReport& report, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << "task_id,metric,value,direction,n,flagged\n";
    for (const auto& e : report.entries)
        f << csv_escape(e.task_id) << "," << e.metric << "," << fmt6(e.value) << ","
          << metrics::direction_name(e.direction) << "," << e.n_samples << ","
          << (e.convention_flag ? 1 : 0) << "\n";
}

HeatmapSpec build_heatmap(const std::vector<const DeltaReport*>& reports) {
    if (reports.empty()) throw ValidationError("heatmap: no delta reports");
    HeatmapSpec spec;
    for (const auto* r : reports) spec.col_labels.push_back(r->other_paradigm);
    for (const auto& e : reports[0]->per_task) spec.row_labels.push_back(e.task_id);
    spec.values.assign(spec.row_labels.size(),
                       std::vector<std::optional<double>>(reports.size()));
    for (size_t c = 0; c < reports.size(); ++c)
        for (const auto& e : reports[c]->per_task) {
            auto it =
                std::find(spec.row_labels.begin(), spec.row_labels.end(), e.task_id);
            if (it == spec.row_labels.end())
                throw ValidationError("heatmap: task sets differ between delta reports");
            spec.values[static_cast<size_t>(it - spec.row_labels.begin())][c] =
                e.delta_percent;
        }
    return spec;
}

void render_heatmap_png(const HeatmapSpec& spec, const std::string& path) {
    const int cell_w = 72, cell_h = 22, pad = 6;
    int label_w = 0;
    for (const auto& r : spec.row_labels)
        label_w = std::max(label_w, Canvas::text_width(r) + 2 * pad);
    int top = 30;
    int w = label_w + cell_w * static_cast<int>(spec.col_labels.size()) + pad;
    int h = top + cell_h * static_cast<int>(spec.row_labels.size()) + pad;
    Canvas canvas(w, h, kWhite);
    for (size_t c = 0; c < spec.col_labels.size(); ++c)
        canvas.text(label_w + static_cast<int>(c) * cell_w + pad, 12, spec.col_labels[c],
                    kBlack);
    for (size_t r = 0; r < spec.row_labels.size(); ++r) {
        int y = top + static_cast<int>(r) * cell_h;
        canvas.text(pad, y + 7, spec.row_labels[r], kBlack);
        for (size_t c = 0; c < spec.col_labels.size(); ++c) {
            int x = label_w + static_cast<int>(c) * cell_w;
            auto v = spec.values[r][c];
            canvas.fill_rect(x, y, cell_w, cell_h, v ? delta_color(*v) : Rgb{230, 230, 230});
            canvas.frame_rect(x, y, cell_w, cell_h, kGrid);
            canvas.text(x + 4, y + 7, v ? fmt6(*v) : std::string("n/a"), kBlack);
        }
    }
    canvas.save(path);
}

BarChartSpec build_barchart(const metrics::MetricReport& baseline,
                            const std::vector<const metrics::MetricReport*>& others,
                            const std::map<std::string, TaskType>& task_types) {
    BarChartSpec spec;
    spec.series.push_back(baseline.paradigm.empty() ? "baseline" : baseline.paradigm);
    for (const auto* o : others) spec.series.push_back(o->paradigm);
    for (const auto& [task, type] : task_types) {
        std::string metric = primary_metric(type);
        const metrics::MetricEntry* base_e = baseline.find(task, metric);
        if (!base_e && type == TaskType::cls) {
            metric = "ACC";
            base_e = baseline.find(task, metric);
        }
        if (!base_e)
            throw ValidationError("barchart: baseline report lacks task '" + task + "'");
        std::vector<double> vals{round6(base_e->value)};
        for (const auto* o : others) {
            const auto* e = o->find(task, metric);
            if (!e)
                throw ValidationError("barchart: report '" + o->paradigm + "' lacks " +
                                      task + "/" + metric);
            vals.push_back(round6(e->value));
        }
        spec.tasks.push_back(task);
        spec.metrics.push_back(metric);
        spec.values.push_back(std::move(vals));
    }
    return spec;
}

void render_barchart_png(const BarChartSpec& spec, const std::string& path) {
    const int bar_w = 18, gap = 10, chart_h = 130, pad = 8;
    int group_w = bar_w * static_cast<int>(spec.series.size()) + gap * 2;
    int w = pad * 2 + group_w * static_cast<int>(spec.tasks.size());
    int legend_h = 14;
    int h = chart_h + 60 + legend_h;
    Canvas canvas(std::max(w, 320), h, kWhite);
    const Rgb palette[] = {{70, 70, 70}, {220, 120, 40}, {60, 120, 220}, {70, 170, 90}};
    for (size_t s = 0; s < spec.series.size(); ++s) {
        int lx = pad + static_cast<int>(s) * 90;
        canvas.fill_rect(lx, 4, 10, 8, palette[s % 4]);
        canvas.text(lx + 14, 4, spec.series[s], kBlack);
    }
    for (size_t t = 0; t < spec.tasks.size(); ++t) {
        int x0 = pad + static_cast<int>(t) * group_w;
        double vmax = 1e-12;
        for (double v : spec.values[t]) vmax = std::max(vmax, std::abs(v));
        for (size_t s = 0; s < spec.series.size(); ++s) {
            double frac = std::abs(spec.values[t][s]) / vmax;
            int bh = static_cast<int>(frac * (chart_h - 2));
            int x = x0 + gap + static_cast<int>(s) * bar_w;
            canvas.fill_rect(x, legend_h + chart_h - bh, bar_w - 3, bh, palette[s % 4]);
        }
        canvas.text(x0 + 2, legend_h + chart_h + 6, spec.tasks[t], kBlack);
        canvas.text(x0 + 2, legend_h + chart_h + 16, "(" + spec.metrics[t] + ")", kBlack);
        for (size_t s = 0; s < spec.series.size(); ++s)
            canvas.text(x0 + 2, legend_h + chart_h + 26 + static_cast<int>(s) * 10,
                        fmt6(spec.values[t][s]), palette[s % 4]);
    }
    canvas.save(path);
}

void render_group_summary_md(const std::vector<const DeltaReport*>& reports,
                             const metrics::MetricReport& baseline,
                             const std::string& path) {
    if (reports.empty()) throw ValidationError("group summary: no delta reports");
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    DeltaMode mode = reports[0]->mode;
    f << "# Group-wise average performance change vs "
      << reports[0]->baseline_paradigm << " (mode: " << delta_mode_name(mode) << ")\n\n";
    f << "| Group | #Images |";
    for (const auto* r : reports) f << " Delta(" << r->other_paradigm << ") |";
    f << "\n|---|---|";
    for (size_t i = 0; i < reports.size(); ++i) f << "---|";
    f << "\n";

    // evaluated sample counts per group, from the baseline report
    std::map<std::string, int> group_n;
    for (const auto* r : reports)
        for (const auto& e : r->per_task) {
            const auto* entry = baseline.find(e.task_id, e.metric);
            if (entry) group_n[e.group] += entry->n_samples;
        }
    for (auto& [g, n] : group_n) n /= static_cast<int>(reports.size());

    std::vector<std::string> groups;
    for (const auto& g : reports[0]->per_group) groups.push_back(g.group);
    for (const auto& group : groups) {
        f << "| " << group << " | " << group_n[group] << " |";
        for (const auto* r : reports) {
            bool found = false;
            for (const auto& g : r->per_group)
                if (g.group == group) {
                    double v =
                        mode == DeltaMode::percent ? *g.mean_percent : g.mean_absolute;
                    f << " " << fmt6(v) << " |";
                    found = true;
                }
            if (!found) f << " n/a |";
        }
        f << "\n";
    }
}

}  // namespace analysis
}  // namespace usmt
