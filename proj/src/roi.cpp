#include "augcn/roi.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "augcn/image.hpp"

namespace augcn {

const char* laterality_name(Laterality l) {
    switch (l) {
        case Laterality::none: return "none";
        case Laterality::left: return "left";
        case Laterality::right: return "right";
        case Laterality::up: return "up";
        case Laterality::down: return "down";
    }
    return "none";
}

Laterality laterality_from_name(const std::string& name) {
    if (name == "none") return Laterality::none;
    if (name == "left") return Laterality::left;
    if (name == "right") return Laterality::right;
    if (name == "up") return Laterality::up;
    if (name == "down") return Laterality::down;
    throw std::invalid_argument("unknown laterality '" + name + "'");
}

std::size_t RoiLayout::global_index() const {
    if (!has_global) throw std::logic_error("layout has no global ROI");
    return rois.size() - 1;
}

int RoiLayout::au_index(int au_id) const {
    for (std::size_t i = 0; i < au_ids.size(); ++i) {
        if (au_ids[i] == au_id) return static_cast<int>(i);
    }
    return -1;
}

LandmarkSet canonical_landmarks(std::size_t image_size) {
    if (image_size < 2) throw std::invalid_argument("canonical_landmarks: image too small");
    LandmarkSet lm;
    lm.scheme = "ibug68";
    std::vector<Point>& p = lm.points;
    p.resize(68);
    const double pi = 3.14159265358979323846;

    // Jaw line 0..16: arc from the temples down around the chin.
    for (int i = 0; i <= 16; ++i) {
        double t = static_cast<double>(i) / 16.0;
        p[i] = {99.5 - 72.0 * std::cos(pi * t), 70.0 + 115.0 * std::sin(pi * t)};
    }
    // Brows 17..26.
    p[17] = {40, 60};  p[18] = {52, 55};  p[19] = {64, 52};  p[20] = {76, 54};  p[21] = {88, 58};
    p[22] = {111, 58}; p[23] = {123, 54}; p[24] = {135, 52}; p[25] = {147, 55}; p[26] = {159, 60};
    // Nose bridge 27..30 and base 31..35.
    p[27] = {99.5, 66}; p[28] = {99.5, 78}; p[29] = {99.5, 90}; p[30] = {99.5, 102};
    p[31] = {85, 112};  p[32] = {92, 114}; p[33] = {99.5, 116}; p[34] = {107, 114}; p[35] = {114, 112};
    // Eyes 36..47.
    p[36] = {52, 70};  p[37] = {61, 65};  p[38] = {72, 65};  p[39] = {82, 70};
    p[40] = {72, 75};  p[41] = {61, 75};
    p[42] = {117, 70}; p[43] = {127, 65}; p[44] = {138, 65}; p[45] = {147, 70};
    p[46] = {138, 75}; p[47] = {127, 75};
    // Outer lips 48..59.
    p[48] = {70, 150};  p[49] = {81, 144};  p[50] = {91, 141};  p[51] = {99.5, 142};
    p[52] = {108, 141}; p[53] = {118, 144}; p[54] = {129, 150}; p[55] = {118, 157};
    p[56] = {108, 161}; p[57] = {99.5, 162}; p[58] = {91, 161}; p[59] = {81, 157};
    // Inner lips 60..67.
    p[60] = {76, 150};  p[61] = {89, 148};  p[62] = {99.5, 149}; p[63] = {110, 148};
    p[64] = {123, 150}; p[65] = {110, 153}; p[66] = {99.5, 154}; p[67] = {89, 153};

    // Map [0, 199] onto [0, size-1] so mirror pairs keep x_a + x_b = size-1.
    const double s = static_cast<double>(image_size - 1) / 199.0;
    for (Point& q : p) {
        q.x *= s;
        q.y *= s;
    }
    return lm;
}

namespace {

AuCenterRule one(int au, Laterality lat, int lm, double ox, double oy) {
    AuCenterRule r;
    r.au_id = au;
    r.laterality = lat;
    r.lm_a = lm;
    r.off_x = ox;
    r.off_y = oy;
    return r;
}

AuCenterRule two(int au, Laterality lat, int lma, int lmb, double ox, double oy) {
    AuCenterRule r = one(au, lat, lma, ox, oy);
    r.w_a = 0.5;
    r.lm_b = lmb;
    r.w_b = 0.5;
    return r;
}

constexpr Laterality kL = Laterality::left;
constexpr Laterality kR = Laterality::right;
constexpr Laterality kU = Laterality::up;
constexpr Laterality kD = Laterality::down;
constexpr Laterality kN = Laterality::none;

std::vector<AuCenterRule> upper_face_rules() {
    return {
        one(1, kR, 21, 0, -10), one(1, kL, 22, 0, -10),
        one(2, kR, 18, 0, -10), one(2, kL, 25, 0, -10),
        one(4, kR, 19, 0, 8),   one(4, kL, 24, 0, 8),
        two(6, kR, 40, 41, 0, 14), two(6, kL, 47, 46, 0, 14),
    };
}

}  // namespace

DatasetConfig dataset_bp4d() {
    DatasetConfig c;
    c.name = "bp4d";
    c.au_ids = {1, 2, 4, 6, 7, 10, 12, 14, 15, 17, 23, 24};
    c.rules = upper_face_rules();
    auto more = std::vector<AuCenterRule>{
        two(7, kR, 36, 39, 0, 0),  two(7, kL, 45, 42, 0, 0),
        one(10, kR, 50, 0, -6),    one(10, kL, 52, 0, -6),
        one(12, kR, 48, 0, 0),     one(12, kL, 54, 0, 0),
        one(14, kR, 48, 6, 2),     one(14, kL, 54, -6, 2),
        one(15, kR, 48, 0, 8),     one(15, kL, 54, 0, 8),
        two(17, kR, 57, 8, -12, 0), two(17, kL, 57, 8, 12, 0),
        one(23, kU, 51, 0, -2),    one(23, kD, 57, 0, 2),
        two(24, kN, 62, 66, 0, 0),
    };
    c.rules.insert(c.rules.end(), more.begin(), more.end());
    c.local_rois = {
        {{1}, kR, 1},  {{1}, kL, 1},  {{2}, kR, 2},  {{2}, kL, 2},
        {{4}, kR, 4},  {{4}, kL, 4},  {{6}, kR, 6},  {{6}, kL, 6},
        {{7}, kR, 7},  {{7}, kL, 7},  {{10}, kR, 10}, {{10}, kL, 10},
        {{12, 14, 15}, kR, 12}, {{12, 14, 15}, kL, 12},
        {{17}, kR, 17}, {{17}, kL, 17},
        {{23, 24}, kU, 23}, {{23, 24}, kD, 23},
    };
    c.symmetric_pairs = {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9},
                         {10, 11}, {12, 13}, {14, 15}, {16, 17}};
    return c;
}

DatasetConfig dataset_disfa() {
    DatasetConfig c;
    c.name = "disfa";
    c.au_ids = {1, 2, 4, 6, 9, 12, 25, 26};
    c.rules = upper_face_rules();
    auto more = std::vector<AuCenterRule>{
        one(9, kN, 28, 0, 0),
        one(12, kR, 48, 0, 0), one(12, kL, 54, 0, 0),
        one(25, kU, 62, 0, 0), one(25, kD, 66, 0, 0),
        one(26, kN, 8, 0, -12),
    };
    c.rules.insert(c.rules.end(), more.begin(), more.end());
    c.local_rois = {
        {{1}, kR, 1}, {{1}, kL, 1}, {{2}, kR, 2}, {{2}, kL, 2},
        {{4}, kR, 4}, {{4}, kL, 4}, {{6}, kR, 6}, {{6}, kL, 6},
        {{9}, kN, 9},
        {{12}, kR, 12}, {{12}, kL, 12},
        {{25, 26}, kU, 25}, {{25, 26}, kD, 25},
    };
    c.symmetric_pairs = {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {9, 10}, {11, 12}};
    return c;
}

DatasetConfig dataset_toy() {
    DatasetConfig c;
    c.name = "toy";
    c.au_ids = {1, 2, 3, 4};
    c.rules = {
        one(1, kR, 21, 0, -10), one(1, kL, 22, 0, -10),
        one(2, kN, 30, 0, 0),
        one(3, kN, 51, 0, 0),
        one(4, kN, 8, 0, -12),
    };
    c.local_rois = {{{1}, kR, 1}, {{1}, kL, 1}, {{2}, kN, 2}, {{3}, kN, 3}, {{4}, kN, 4}};
    c.symmetric_pairs = {{0, 1}};
    return c;
}

DatasetConfig dataset_tiny() {
    DatasetConfig c;
    c.name = "tiny";
    c.au_ids = {1, 2, 3};
    c.rules = {
        one(1, kR, 21, 0, -10), one(1, kL, 22, 0, -10),
        one(2, kN, 30, 0, 0),
        one(3, kN, 51, 0, 0),
    };
    c.local_rois = {{{1}, kR, 1}, {{1}, kL, 1}, {{2, 3}, kN, 2}};
    c.symmetric_pairs = {{0, 1}};
    return c;
}

DatasetConfig dataset_by_name(const std::string& name) {
    if (name == "bp4d") return dataset_bp4d();
    if (name == "disfa") return dataset_disfa();
    if (name == "toy") return dataset_toy();
    if (name == "tiny") return dataset_tiny();
    throw std::invalid_argument("unknown dataset config '" + name + "'");
}

std::vector<AuCenter> compute_au_centers(const LandmarkSet& landmarks,
                                         const std::vector<AuCenterRule>& rules,
                                         std::size_t image_w, std::size_t image_h) {
    if (rules.empty()) throw std::invalid_argument("compute_au_centers: empty rule list");
    const std::size_t k = landmarks.points.size();
    std::vector<AuCenter> out;
    out.reserve(rules.size());
    for (const AuCenterRule& r : rules) {
        if (r.lm_a < 0 || static_cast<std::size_t>(r.lm_a) >= k ||
            (r.lm_b >= 0 && static_cast<std::size_t>(r.lm_b) >= k)) {
            throw std::out_of_range("rule for AU " + std::to_string(r.au_id) +
                                    " references a landmark outside the " +
                                    std::to_string(k) + "-point set");
        }
        const Point& a = landmarks.points[static_cast<std::size_t>(r.lm_a)];
        Point c{r.w_a * a.x + r.off_x, r.w_a * a.y + r.off_y};
        if (r.lm_b >= 0) {
            const Point& b = landmarks.points[static_cast<std::size_t>(r.lm_b)];
            c.x += r.w_b * b.x;
            c.y += r.w_b * b.y;
        }
        c.x = std::clamp(c.x, 0.0, static_cast<double>(image_w - 1));
        c.y = std::clamp(c.y, 0.0, static_cast<double>(image_h - 1));
        out.push_back({r.au_id, r.laterality, c});
    }
    return out;
}

Tensor extract_roi(const Tensor& image, Point center, std::size_t n) {
    if (image.rank() != 3) {
        throw std::invalid_argument("extract_roi: expected H x W x ch, got " + image.shape_str());
    }
    const std::size_t h = image.dim(0), w = image.dim(1), ch = image.dim(2);
    if (n > h || n > w) {
        throw std::invalid_argument("extract_roi: window " + std::to_string(n) +
                                    " exceeds image " + image.shape_str());
    }
    // Floor-centered window, shifted inward at the borders.
    const long half = static_cast<long>((n - 1) / 2);
    long row = std::lround(center.y) - half;
    long col = std::lround(center.x) - half;
    row = std::clamp(row, 0L, static_cast<long>(h - n));
    col = std::clamp(col, 0L, static_cast<long>(w - n));
    Tensor out({n, n, ch});
    for (std::size_t i = 0; i < n; ++i) {
        const double* src = image.data() +
                            ((static_cast<std::size_t>(row) + i) * w +
                             static_cast<std::size_t>(col)) * ch;
        std::copy_n(src, n * ch, out.data() + i * n * ch);
    }
    return out;
}

Tensor extract_global(const Tensor& image, std::size_t n) {
    if (image.rank() != 3) {
        throw std::invalid_argument("extract_global: expected H x W x ch, got " +
                                    image.shape_str());
    }
    if (image.dim(0) < 2 || image.dim(1) < 2) {
        throw std::invalid_argument("extract_global: image too small, " + image.shape_str());
    }
    return resize_bilinear(image, n);
}

RoiLayout build_layout(const DatasetConfig& config, const std::vector<AuCenterRule>& rules,
                       std::size_t n, bool include_global) {
    // Every AU of the config needs at least one rule and one local ROI.
    for (int au : config.au_ids) {
        bool has_rule = std::any_of(rules.begin(), rules.end(),
                                    [au](const AuCenterRule& r) { return r.au_id == au; });
        if (!has_rule) {
            throw std::invalid_argument("config '" + config.name + "': AU " +
                                        std::to_string(au) + " has no center rule");
        }
        bool in_roi = std::any_of(
            config.local_rois.begin(), config.local_rois.end(),
            [au](const DatasetConfig::RoiDef& d) {
                return std::find(d.au_ids.begin(), d.au_ids.end(), au) != d.au_ids.end();
            });
        if (!in_roi) {
            throw std::invalid_argument("config '" + config.name + "': AU " +
                                        std::to_string(au) + " belongs to no local ROI");
        }
    }

    LandmarkSet canonical = canonical_landmarks(200);
    std::vector<AuCenter> centers = compute_au_centers(canonical, rules, 200, 200);
    auto center_of = [&](int au, Laterality lat) -> Point {
        for (const AuCenter& c : centers) {
            if (c.au_id == au && c.laterality == lat) return c.center;
        }
        // Fall back to any rule for the anchor AU.
        for (const AuCenter& c : centers) {
            if (c.au_id == au) return c.center;
        }
        throw std::logic_error("no center for AU " + std::to_string(au));
    };

    RoiLayout layout;
    layout.au_ids = config.au_ids;
    for (std::size_t i = 0; i < config.local_rois.size(); ++i) {
        const DatasetConfig::RoiDef& def = config.local_rois[i];
        if (def.au_ids.empty()) {
            throw std::invalid_argument("local ROI " + std::to_string(i) + " carries no AU");
        }
        RoiSpec spec;
        spec.roi_id = i;
        spec.kind = RoiSpec::Kind::local;
        spec.size = n;
        spec.au_ids = def.au_ids;
        std::sort(spec.au_ids.begin(), spec.au_ids.end());
        spec.laterality = def.laterality;
        spec.anchor_au = def.anchor_au;
        spec.center = center_of(def.anchor_au, def.laterality);
        layout.rois.push_back(std::move(spec));
    }
    layout.has_global = include_global;
    if (include_global) {
        RoiSpec global;
        global.roi_id = config.local_rois.size();
        global.kind = RoiSpec::Kind::global;
        global.size = n;
        global.laterality = Laterality::none;
        layout.rois.push_back(std::move(global));
    }

    const std::size_t r = layout.rois.size();
    const std::size_t num_local = config.local_rois.size();
    const std::size_t c = config.au_ids.size();
    layout.incidence.assign(c, std::vector<bool>(r, false));
    for (std::size_t ri = 0; ri < num_local; ++ri) {
        for (int au : layout.rois[ri].au_ids) {
            int ci = layout.au_index(au);
            if (ci < 0) {
                throw std::invalid_argument("ROI " + std::to_string(ri) + " references AU " +
                                            std::to_string(au) + " outside config '" +
                                            config.name + "'");
            }
            layout.incidence[static_cast<std::size_t>(ci)][ri] = true;
        }
    }

    std::set<std::size_t> used;
    for (auto [a, b] : config.symmetric_pairs) {
        if (a >= num_local || b >= num_local || a == b || used.count(a) || used.count(b)) {
            throw std::invalid_argument("config '" + config.name +
                                        "': symmetric pairs must be disjoint local ROIs");
        }
        used.insert(a);
        used.insert(b);
    }
    layout.symmetric_pairs = config.symmetric_pairs;
    return layout;
}

std::vector<Point> roi_centers(const RoiLayout& layout, const std::vector<AuCenterRule>& rules,
                               const LandmarkSet& landmarks, std::size_t image_w,
                               std::size_t image_h) {
    std::vector<AuCenter> centers = compute_au_centers(landmarks, rules, image_w, image_h);
    const std::size_t num_local = layout.num_rois() - (layout.has_global ? 1 : 0);
    std::vector<Point> out;
    out.reserve(num_local);
    for (std::size_t i = 0; i < num_local; ++i) {
        const RoiSpec& spec = layout.rois[i];
        const AuCenter* exact = nullptr;
        const AuCenter* fallback = nullptr;
        for (const AuCenter& c : centers) {
            if (c.au_id != spec.anchor_au) continue;
            if (c.laterality == spec.laterality) {
                exact = &c;
                break;
            }
            if (!fallback) fallback = &c;
        }
        if (!exact && !fallback) {
            throw std::invalid_argument("no rule centers ROI " + std::to_string(i) +
                                        " (anchor AU " + std::to_string(spec.anchor_au) + ")");
        }
        out.push_back((exact ? exact : fallback)->center);
    }
    return out;
}

Tensor extract_sample_patches(const Tensor& image, const LandmarkSet& landmarks,
                              const RoiLayout& layout,
                              const std::vector<AuCenterRule>& rules) {
    const std::size_t n = layout.rois.front().size;
    const std::size_t ch = image.dim(2);
    std::vector<Point> centers =
        roi_centers(layout, rules, landmarks, image.dim(1), image.dim(0));
    Tensor out({layout.num_rois(), n * n * ch});
    for (std::size_t i = 0; i < centers.size(); ++i) {
        Tensor patch = extract_roi(image, centers[i], n);
        std::copy_n(patch.data(), patch.size(), out.data() + i * out.dim(1));
    }
    if (layout.has_global) {
        Tensor global = extract_global(image, n);
        std::copy_n(global.data(), global.size(),
                    out.data() + layout.global_index() * out.dim(1));
    }
    return out;
}

namespace {

std::vector<double> parse_num_list(const std::string& s, const std::string& line) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw std::runtime_error("bad number '" + item + "' in rule line: " + line);
        }
    }
    return out;
}

}  // namespace

std::vector<AuCenterRule> load_rules(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open rule table '" + path + "'");
    std::vector<AuCenterRule> rules;
    std::string line;
    while (std::getline(in, line)) {
        std::string_view body(line);
        if (auto hash = body.find('#'); hash != std::string_view::npos)
            body = body.substr(0, hash);
        std::stringstream ss{std::string(body)};
        std::string tok;
        AuCenterRule r;
        bool any_token = false, has_au = false, has_lm = false, has_w = false;
        std::vector<double> lms, ws, off;
        while (ss >> tok) {
            any_token = true;
            auto eq = tok.find('=');
            if (eq == std::string::npos) {
                throw std::runtime_error("expected key=value in rule line: " + line);
            }
            std::string key = tok.substr(0, eq);
            std::string val = tok.substr(eq + 1);
            if (key == "au") {
                r.au_id = std::stoi(val);
                has_au = true;
            } else if (key == "lat") {
                r.laterality = laterality_from_name(val);
            } else if (key == "lm") {
                lms = parse_num_list(val, line);
                has_lm = true;
            } else if (key == "w") {
                ws = parse_num_list(val, line);
                has_w = true;
            } else if (key == "off") {
                off = parse_num_list(val, line);
            } else {
                throw std::runtime_error("unknown key '" + key + "' in rule line: " + line);
            }
        }
        if (!any_token) continue;  // blank/comment line
        if (!has_au || !has_lm || lms.empty() || lms.size() > 2) {
            throw std::runtime_error("rule needs au= and lm= with 1 or 2 points: " + line);
        }
        r.lm_a = static_cast<int>(lms[0]);
        if (lms.size() == 2) r.lm_b = static_cast<int>(lms[1]);
        if (has_w) {
            if (ws.size() != lms.size()) {
                throw std::runtime_error("w= count must match lm= count: " + line);
            }
            r.w_a = ws[0];
            if (ws.size() == 2) r.w_b = ws[1];
        } else {
            r.w_a = lms.size() == 2 ? 0.5 : 1.0;
            r.w_b = lms.size() == 2 ? 0.5 : 0.0;
        }
        if (off.size() == 2) {
            r.off_x = off[0];
            r.off_y = off[1];
        } else if (!off.empty()) {
            throw std::runtime_error("off= needs exactly dx,dy: " + line);
        }
        rules.push_back(r);
    }
    if (rules.empty()) throw std::runtime_error("rule table '" + path + "' contains no rules");
    return rules;
}

void save_rules(const std::string& path, const std::vector<AuCenterRule>& rules) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << "# AU center rules: au=<id> lat=<side> lm=<i[,j]> [w=<wa[,wb]>] off=<dx,dy>\n";
    for (const AuCenterRule& r : rules) {
        out << "au=" << r.au_id << " lat=" << laterality_name(r.laterality) << " lm=" << r.lm_a;
        if (r.lm_b >= 0) out << ',' << r.lm_b;
        out << " w=" << r.w_a;
        if (r.lm_b >= 0) out << ',' << r.w_b;
        out << " off=" << r.off_x << ',' << r.off_y << "\n";
    }
}

LandmarkSet load_landmarks(const std::string& path, std::size_t expected_count,
                           const std::string& scheme) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open landmark file '" + path + "'");
    LandmarkSet lm;
    lm.scheme = scheme;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        double x, y;
        char comma;
        if (!(ss >> x >> comma >> y) || comma != ',') {
            throw std::runtime_error("bad landmark line '" + line + "' in " + path);
        }
        lm.points.push_back({x, y});
    }
    if (lm.points.size() != expected_count) {
        throw std::runtime_error("landmark file '" + path + "' has " +
                                 std::to_string(lm.points.size()) + " points, expected " +
                                 std::to_string(expected_count));
    }
    return lm;
}

void save_landmarks(const std::string& path, const LandmarkSet& landmarks) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    for (const Point& p : landmarks.points) out << p.x << ',' << p.y << "\n";
}

}  // namespace augcn
