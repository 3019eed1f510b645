#include "augcn/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "augcn/image.hpp"

namespace augcn {

static_assert(std::endian::native == std::endian::little,
              "binary file formats assume a little-endian host");

bool SampleRecord::any_positive() const {
    return std::any_of(labels.begin(), labels.end(), [](int v) { return v != 0; });
}

std::vector<std::string> DatasetManifest::subjects() const {
    std::vector<std::string> out;
    for (const SampleRecord& r : records) {
        if (std::find(out.begin(), out.end(), r.subject_id) == out.end())
            out.push_back(r.subject_id);
    }
    return out;
}

DatasetManifest DatasetManifest::fold_subset(int fold, bool keep) const {
    DatasetManifest out;
    out.config_name = config_name;
    out.au_ids = au_ids;
    out.fold_of_subject = fold_of_subject;
    for (const SampleRecord& r : records) {
        auto it = fold_of_subject.find(r.subject_id);
        if (it == fold_of_subject.end()) {
            throw std::runtime_error("subject '" + r.subject_id + "' has no fold assignment");
        }
        if ((it->second == fold) == keep) out.records.push_back(r);
    }
    return out;
}

std::vector<std::vector<int>> DatasetManifest::label_table() const {
    std::vector<std::vector<int>> out;
    out.reserve(records.size());
    for (const SampleRecord& r : records) out.push_back(r.labels);
    return out;
}

std::vector<double> DatasetManifest::occurrence_rates() const {
    if (records.empty()) throw std::runtime_error("occurrence rates of an empty manifest");
    std::vector<double> rates(num_classes(), 0.0);
    for (const SampleRecord& r : records) {
        for (std::size_t c = 0; c < rates.size(); ++c) rates[c] += r.labels[c] ? 1.0 : 0.0;
    }
    for (double& v : rates) v /= static_cast<double>(records.size());
    return rates;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

}  // namespace

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest '" + path + "'");
    DatasetManifest m;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            auto pos = t.find("config:");
            if (pos != std::string::npos) m.config_name = trim(t.substr(pos + 7));
            continue;
        }
        std::vector<std::string> fields = split_csv(t);
        if (!have_header) {
            if (fields.size() < 6 || fields[0] != "subject_id") {
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": expected manifest header starting with subject_id");
            }
            for (std::size_t i = 5; i < fields.size(); ++i) {
                std::string h = trim(fields[i]);
                if (h.rfind("AU", 0) == 0 || h.rfind("au", 0) == 0) h = h.substr(2);
                try {
                    std::size_t used = 0;
                    int au = std::stoi(h, &used);
                    if (used != h.size() || au < 0) throw std::invalid_argument(h);
                    m.au_ids.push_back(au);
                } catch (const std::exception&) {
                    throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                             ": unknown AU id in header column '" +
                                             fields[i] + "'");
                }
            }
            have_header = true;
            continue;
        }
        if (fields.size() != 5 + m.au_ids.size()) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": row for frame '" +
                                     (fields.size() > 2 ? fields[2] : "?") + "' has " +
                                     std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(5 + m.au_ids.size()));
        }
        SampleRecord r;
        r.subject_id = trim(fields[0]);
        r.video_id = trim(fields[1]);
        r.frame_id = trim(fields[2]);
        r.image_path = trim(fields[3]);
        r.landmarks_path = trim(fields[4]);
        for (std::size_t i = 5; i < fields.size(); ++i) {
            std::string v = trim(fields[i]);
            if (v != "0" && v != "1") {
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": label for frame '" + r.frame_id +
                                         "' must be 0 or 1, got '" + v + "'");
            }
            r.labels.push_back(v == "1" ? 1 : 0);
        }
        m.records.push_back(std::move(r));
    }
    if (!have_header) throw std::runtime_error("manifest '" + path + "' has no header");
    if (m.records.empty()) throw std::runtime_error("empty manifest '" + path + "'");
    return m;
}

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    if (!manifest.config_name.empty()) out << "# config: " << manifest.config_name << "\n";
    out << "subject_id,video_id,frame_id,image_path,landmarks_path";
    for (int au : manifest.au_ids) out << ",AU" << au;
    out << "\n";
    for (const SampleRecord& r : manifest.records) {
        out << r.subject_id << ',' << r.video_id << ',' << r.frame_id << ',' << r.image_path
            << ',' << r.landmarks_path;
        for (int v : r.labels) out << ',' << (v ? 1 : 0);
        out << "\n";
    }
}

std::vector<SampleRecord> balanced_sample(const DatasetManifest& manifest,
                                          std::size_t per_video_pos,
                                          std::size_t per_video_neg, SeededRng& rng,
                                          std::vector<std::string>* warnings) {
    // Videos keep their first-seen order so the draw sequence is stable.
    std::vector<std::string> video_keys;
    std::map<std::string, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const SampleRecord& r = manifest.records[i];
        std::string key = r.subject_id + "/" + r.video_id;
        auto [it, fresh] = members.emplace(key, std::vector<std::size_t>{});
        if (fresh) video_keys.push_back(key);
        it->second.push_back(i);
    }
    std::vector<SampleRecord> out;
    for (const std::string& key : video_keys) {
        std::vector<std::size_t> pos, neg;
        for (std::size_t i : members[key]) {
            (manifest.records[i].any_positive() ? pos : neg).push_back(i);
        }
        rng.shuffle(pos);
        rng.shuffle(neg);
        const std::size_t take_pos = std::min(per_video_pos, pos.size());
        const std::size_t take_neg = std::min(per_video_neg, neg.size());
        if (warnings && (take_pos < per_video_pos || take_neg < per_video_neg)) {
            warnings->push_back("video " + key + " is short: took " +
                                std::to_string(take_pos) + "/" + std::to_string(per_video_pos) +
                                " positive and " + std::to_string(take_neg) + "/" +
                                std::to_string(per_video_neg) + " negative frames");
        }
        for (std::size_t k = 0; k < take_pos; ++k) out.push_back(manifest.records[pos[k]]);
        for (std::size_t k = 0; k < take_neg; ++k) out.push_back(manifest.records[neg[k]]);
    }
    return out;
}

std::map<std::string, int> split_3fold(const DatasetManifest& manifest, SeededRng& rng) {
    std::vector<std::string> subjects = manifest.subjects();
    if (subjects.size() < 3) {
        throw std::runtime_error("3-fold split needs at least 3 subjects, got " +
                                 std::to_string(subjects.size()));
    }
    rng.shuffle(subjects);
    std::map<std::string, int> folds;
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        folds[subjects[i]] = static_cast<int>(i % 3);
    }
    return folds;
}

namespace {

void check_planted(const Tensor& m_bool) {
    if (m_bool.rank() != 2 || m_bool.dim(0) != m_bool.dim(1)) {
        throw std::invalid_argument("planted relation matrix must be square");
    }
    const std::size_t c = m_bool.dim(0);
    for (std::size_t i = 0; i < c; ++i) {
        if (m_bool.at(i, i) == 0.0) {
            throw std::invalid_argument("planted relation matrix needs a unit diagonal");
        }
        for (std::size_t j = 0; j < c; ++j) {
            if (m_bool.at(i, j) != m_bool.at(j, i)) {
                throw std::invalid_argument("planted relation matrix must be symmetric");
            }
        }
    }
}

// Connected components over the off-diagonal edges, numbered by their
// smallest member so the factor draw order is stable.
std::vector<std::size_t> components_of(const Tensor& m_bool) {
    const std::size_t c = m_bool.dim(0);
    std::vector<std::size_t> comp(c, c);
    std::size_t next = 0;
    for (std::size_t s = 0; s < c; ++s) {
        if (comp[s] != c) continue;
        std::queue<std::size_t> q;
        q.push(s);
        comp[s] = next;
        while (!q.empty()) {
            std::size_t i = q.front();
            q.pop();
            for (std::size_t j = 0; j < c; ++j) {
                if (i != j && m_bool.at(i, j) != 0.0 && comp[j] == c) {
                    comp[j] = next;
                    q.push(j);
                }
            }
        }
        ++next;
    }
    return comp;
}

}  // namespace

SynthSpec make_synth_spec(const DatasetConfig& config, Tensor m_bool, std::size_t num_samples,
                          double noise) {
    SynthSpec spec;
    spec.config = config;
    spec.m_bool = std::move(m_bool);
    spec.num_samples = num_samples;
    spec.pixel_noise = noise;
    spec.label_flip = noise / 10.0;
    return spec;
}

std::vector<std::vector<int>> generate_labels(const SynthSpec& spec, std::size_t n,
                                              SeededRng& rng) {
    check_planted(spec.m_bool);
    const std::size_t c = spec.m_bool.dim(0);
    if (c != spec.config.num_classes()) {
        throw std::invalid_argument("planted matrix is " + std::to_string(c) +
                                    "-way but config '" + spec.config.name + "' has " +
                                    std::to_string(spec.config.num_classes()) + " AUs");
    }
    std::vector<std::size_t> comp = components_of(spec.m_bool);
    const std::size_t num_comp = *std::max_element(comp.begin(), comp.end()) + 1;
    std::vector<std::vector<int>> out(n, std::vector<int>(c, 0));
    std::vector<int> factor(num_comp, 0);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t k = 0; k < num_comp; ++k) {
            factor[k] = rng.uniform() < spec.factor_rate ? 1 : 0;
        }
        for (std::size_t i = 0; i < c; ++i) {
            int y = factor[comp[i]];
            if (spec.label_flip > 0.0 && rng.uniform() < spec.label_flip) y = 1 - y;
            out[s][i] = y;
        }
    }
    return out;
}

Tensor render_face(const SynthSpec& spec, const std::vector<int>& labels, SeededRng& rng) {
    const std::size_t size = spec.image_size;
    LandmarkSet lm = canonical_landmarks(size);
    std::vector<AuCenter> centers = compute_au_centers(lm, spec.config.rules, size, size);
    Tensor img({size, size, 1});
    img.fill(spec.background);
    const double radius = spec.blob_radius * static_cast<double>(size) / 200.0;
    const double reach = 3.0 * radius;
    for (std::size_t ci = 0; ci < spec.config.au_ids.size(); ++ci) {
        if (!labels[ci]) continue;
        const int au = spec.config.au_ids[ci];
        for (const AuCenter& c : centers) {
            if (c.au_id != au) continue;
            const long y0 = std::max(0L, std::lround(c.center.y - reach));
            const long y1 = std::min(static_cast<long>(size) - 1, std::lround(c.center.y + reach));
            const long x0 = std::max(0L, std::lround(c.center.x - reach));
            const long x1 = std::min(static_cast<long>(size) - 1, std::lround(c.center.x + reach));
            for (long y = y0; y <= y1; ++y) {
                for (long x = x0; x <= x1; ++x) {
                    const double dy = static_cast<double>(y) - c.center.y;
                    const double dx = static_cast<double>(x) - c.center.x;
                    const double d2 = dx * dx + dy * dy;
                    img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), 0) +=
                        spec.blob_amplitude * std::exp(-d2 / (2.0 * radius * radius));
                }
            }
        }
    }
    if (spec.pixel_noise > 0.0) {
        for (double& v : img.raw()) v += spec.pixel_noise * rng.normal();
    }
    for (double& v : img.raw()) v = std::clamp(v, 0.0, 1.0);
    return img;
}

DatasetManifest generate_synthetic(const SynthSpec& spec, SeededRng& rng,
                                   const std::optional<std::string>& out_dir) {
    if (spec.num_samples == 0) throw std::invalid_argument("generate_synthetic: no samples");
    if (spec.num_subjects == 0 || spec.videos_per_subject == 0) {
        throw std::invalid_argument("generate_synthetic: need subjects and videos");
    }
    DatasetManifest m;
    m.config_name = spec.config.name;
    m.au_ids = spec.config.au_ids;

    std::vector<std::vector<int>> labels = generate_labels(spec, spec.num_samples, rng);

    LandmarkSet lm = canonical_landmarks(spec.image_size);
    std::string landmarks_path;
    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        landmarks_path = (std::filesystem::path(*out_dir) / "landmarks.csv").string();
        save_landmarks(landmarks_path, lm);
    }

    const std::size_t per_subject =
        (spec.num_samples + spec.num_subjects - 1) / spec.num_subjects;
    const std::size_t per_video =
        (per_subject + spec.videos_per_subject - 1) / spec.videos_per_subject;

    for (std::size_t i = 0; i < spec.num_samples; ++i) {
        SampleRecord r;
        const std::size_t subj = i / per_subject;
        const std::size_t vid = (i % per_subject) / std::max<std::size_t>(per_video, 1);
        r.subject_id = "S" + std::to_string(subj + 1);
        r.video_id = "V" + std::to_string(vid + 1);
        r.frame_id = "F" + std::to_string(i + 1);
        r.labels = labels[i];
        Tensor img = render_face(spec, labels[i], rng);
        if (out_dir) {
            char name[32];
            std::snprintf(name, sizeof(name), "img_%06zu.pgm", i + 1);
            r.image_path = (std::filesystem::path(*out_dir) / name).string();
            r.landmarks_path = landmarks_path;
            save_pgm(r.image_path, img);
        } else {
            r.inline_image = std::move(img);
            r.inline_landmarks = lm;
        }
        m.records.push_back(std::move(r));
    }
    return m;
}

PatchSet extract_patches(const DatasetManifest& manifest, const RoiLayout& layout,
                         const std::vector<AuCenterRule>& rules, std::size_t landmark_count) {
    if (manifest.records.empty()) throw std::runtime_error("extract_patches: empty manifest");
    PatchSet out;
    out.num_rois = layout.num_rois();
    const std::size_t n = layout.rois.front().size;
    out.patches.reserve(manifest.records.size());
    out.labels.reserve(manifest.records.size());
    for (const SampleRecord& r : manifest.records) {
        Tensor patches;
        if (r.image_path.size() > 5 &&
            r.image_path.compare(r.image_path.size() - 5, 5, ".rois") == 0) {
            patches = load_patches(r.image_path, out.num_rois, n, 0);
        } else if (r.inline_image) {
            const LandmarkSet& lm =
                r.inline_landmarks ? *r.inline_landmarks
                                   : canonical_landmarks(r.inline_image->dim(0));
            patches = extract_sample_patches(*r.inline_image, lm, layout, rules);
        } else {
            Tensor img = load_image(r.image_path);
            LandmarkSet lm = load_landmarks(r.landmarks_path, landmark_count);
            patches = extract_sample_patches(img, lm, layout, rules);
        }
        if (out.patch_dim == 0) {
            out.patch_dim = patches.dim(1);
        } else if (patches.dim(1) != out.patch_dim) {
            throw std::runtime_error("frame '" + r.frame_id + "' yields patches of width " +
                                     std::to_string(patches.dim(1)) + ", expected " +
                                     std::to_string(out.patch_dim));
        }
        out.patches.push_back(std::move(patches));
        out.labels.push_back(r.labels);
    }
    return out;
}

namespace {

constexpr char kPatchMagic[5] = {'A', 'U', 'R', 'O', 'I'};

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("patch file '" + path + "' is truncated");
    return v;
}

}  // namespace

void save_patches(const std::string& path, const Tensor& patches, std::size_t n,
                  std::size_t channels) {
    if (patches.rank() != 2 || patches.dim(1) != n * n * channels) {
        throw std::invalid_argument("save_patches: expected R x (n*n*ch), got " +
                                    patches.shape_str());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(kPatchMagic, sizeof(kPatchMagic));
    write_pod<std::uint32_t>(out, 1);  // version
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(patches.dim(0)));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(n));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(channels));
    out.write(reinterpret_cast<const char*>(patches.data()),
              static_cast<std::streamsize>(patches.size() * sizeof(double)));
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

Tensor load_patches(const std::string& path, std::size_t expect_rois, std::size_t expect_n,
                    std::size_t expect_channels) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open patch file '" + path + "'");
    char magic[5];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kPatchMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("'" + path + "' is not a patch file");
    }
    const auto version = read_pod<std::uint32_t>(in, path);
    if (version != 1) {
        throw std::runtime_error("patch file '" + path + "' has unsupported version " +
                                 std::to_string(version));
    }
    const auto rois = read_pod<std::uint32_t>(in, path);
    const auto n = read_pod<std::uint32_t>(in, path);
    const auto ch = read_pod<std::uint32_t>(in, path);
    if (expect_rois != 0 && rois != expect_rois) {
        throw std::runtime_error("patch file '" + path + "' holds " + std::to_string(rois) +
                                 " ROIs, expected " + std::to_string(expect_rois));
    }
    if (expect_n != 0 && n != expect_n) {
        throw std::runtime_error("patch file '" + path + "' has n=" + std::to_string(n) +
                                 ", expected " + std::to_string(expect_n));
    }
    if (expect_channels != 0 && ch != expect_channels) {
        throw std::runtime_error("patch file '" + path + "' has ch=" + std::to_string(ch) +
                                 ", expected " + std::to_string(expect_channels));
    }
    Tensor out({rois, static_cast<std::size_t>(n) * n * ch});
    in.read(reinterpret_cast<char*>(out.data()),
            static_cast<std::streamsize>(out.size() * sizeof(double)));
    if (!in) throw std::runtime_error("patch file '" + path + "' is truncated");
    return out;
}

}  // namespace augcn
