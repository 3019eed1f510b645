#include "augcn/relation_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace augcn {

const char* adjacency_mode_name(AdjacencyMatrix::Mode mode) {
    switch (mode) {
        case AdjacencyMatrix::Mode::raw: return "raw";
        case AdjacencyMatrix::Mode::row: return "row";
        case AdjacencyMatrix::Mode::symmetric: return "symmetric";
    }
    return "raw";
}

AdjacencyMatrix::Mode adjacency_mode_from_name(const std::string& name) {
    if (name == "raw") return AdjacencyMatrix::Mode::raw;
    if (name == "row") return AdjacencyMatrix::Mode::row;
    if (name == "symmetric") return AdjacencyMatrix::Mode::symmetric;
    throw std::invalid_argument("unknown adjacency mode '" + name + "'");
}

CondProbMatrix estimate_cond_prob(const std::vector<std::vector<int>>& labels,
                                  const std::vector<int>& au_order, DegenerateAu policy,
                                  std::vector<std::string>* warnings) {
    if (labels.empty()) throw std::invalid_argument("estimate_cond_prob: no labels");
    const std::size_t c = au_order.size();
    for (const auto& row : labels) {
        if (row.size() != c) {
            throw std::invalid_argument("estimate_cond_prob: label row has " +
                                        std::to_string(row.size()) + " entries, expected " +
                                        std::to_string(c));
        }
    }
    std::vector<double> occur(c, 0.0);
    Tensor joint({c, c});
    for (const auto& row : labels) {
        for (std::size_t i = 0; i < c; ++i) {
            if (!row[i]) continue;
            occur[i] += 1.0;
            for (std::size_t j = 0; j < c; ++j) {
                if (row[j]) joint.at(i, j) += 1.0;
            }
        }
    }
    CondProbMatrix out;
    out.au_order = au_order;
    out.m = Tensor({c, c});
    for (std::size_t i = 0; i < c; ++i) {
        if (occur[i] == 0.0) {
            if (policy == DegenerateAu::error) {
                throw std::runtime_error("AU " + std::to_string(au_order[i]) +
                                         " never occurs in the label set");
            }
            if (warnings) {
                warnings->push_back("AU " + std::to_string(au_order[i]) +
                                    " never occurs; its relation row is zeroed");
            }
            out.m.at(i, i) = 1.0;
            continue;
        }
        for (std::size_t j = 0; j < c; ++j) out.m.at(i, j) = joint.at(i, j) / occur[i];
    }
    return out;
}

SymMatrix symmetrize(const CondProbMatrix& m) {
    const std::size_t c = m.au_order.size();
    SymMatrix out;
    out.au_order = m.au_order;
    out.m = Tensor({c, c});
    for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = 0; j < c; ++j) out.m.at(i, j) = m.m.at(i, j) + m.m.at(j, i);
    return out;
}

BoolRelationMatrix binarize(const SymMatrix& m, double h) {
    if (h <= 0.0) throw std::invalid_argument("binarize: threshold must be positive");
    BoolRelationMatrix out;
    out.au_order = m.au_order;
    out.m = Tensor(m.m.shape());
    for (std::size_t i = 0; i < m.m.size(); ++i) out.m[i] = m.m[i] >= h ? 1.0 : 0.0;
    return out;
}

AdjacencyMatrix assemble_graph(const BoolRelationMatrix& m_bool, const RoiLayout& layout) {
    const std::size_t r = layout.num_rois();
    // Map each layout AU onto its m_bool row.
    auto mbool_index = [&](int au) {
        auto it = std::find(m_bool.au_order.begin(), m_bool.au_order.end(), au);
        if (it == m_bool.au_order.end()) {
            throw std::invalid_argument("AU " + std::to_string(au) +
                                        " appears in the layout but not in the relation matrix");
        }
        return static_cast<std::size_t>(it - m_bool.au_order.begin());
    };

    AdjacencyMatrix adj;
    adj.mode = AdjacencyMatrix::Mode::raw;
    adj.g = Tensor({r, r});
    Tensor& g = adj.g;

    for (std::size_t i = 0; i < r; ++i) g.at(i, i) = 1.0;  // rule 1: self loops

    for (auto [a, b] : layout.symmetric_pairs) {           // rule 2: mirror nodes
        g.at(a, b) = 1.0;
        g.at(b, a) = 1.0;
    }

    // rule 3: related AUs connect every node of one to every node of the other
    const std::size_t num_local = r - (layout.has_global ? 1 : 0);
    for (std::size_t a = 0; a < num_local; ++a) {
        for (std::size_t b = a + 1; b < num_local; ++b) {
            bool related = false;
            for (int au_i : layout.rois[a].au_ids) {
                for (int au_j : layout.rois[b].au_ids) {
                    if (m_bool.m.at(mbool_index(au_i), mbool_index(au_j)) != 0.0) {
                        related = true;
                        break;
                    }
                }
                if (related) break;
            }
            if (related) {
                g.at(a, b) = 1.0;
                g.at(b, a) = 1.0;
            }
        }
    }

    if (layout.has_global) {                               // rule 4: global hub
        const std::size_t gi = layout.global_index();
        for (std::size_t i = 0; i < r; ++i) {
            g.at(gi, i) = 1.0;
            g.at(i, gi) = 1.0;
        }
    }
    return adj;
}

AdjacencyMatrix normalize_adjacency(const AdjacencyMatrix& adj, AdjacencyMatrix::Mode mode) {
    if (adj.mode != AdjacencyMatrix::Mode::raw) {
        throw std::invalid_argument("normalize_adjacency expects a raw adjacency");
    }
    AdjacencyMatrix out = adj;
    if (mode == AdjacencyMatrix::Mode::raw) return out;
    out.mode = mode;
    const std::size_t r = adj.g.dim(0);
    std::vector<double> degree(r, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < r; ++j) degree[i] += adj.g.at(i, j);
        if (degree[i] <= 0.0) {
            // Unreachable while the diagonal invariant holds.
            throw std::logic_error("zero-degree node " + std::to_string(i) + " in adjacency");
        }
    }
    if (mode == AdjacencyMatrix::Mode::row) {
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < r; ++j) out.g.at(i, j) = adj.g.at(i, j) / degree[i];
    } else {
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < r; ++j)
                out.g.at(i, j) = adj.g.at(i, j) / std::sqrt(degree[i] * degree[j]);
    }
    return out;
}

AdjacencyMatrix identity_graph(std::size_t num_rois, bool connect_global) {
    AdjacencyMatrix adj;
    adj.g = Tensor({num_rois, num_rois});
    for (std::size_t i = 0; i < num_rois; ++i) adj.g.at(i, i) = 1.0;
    if (connect_global && num_rois > 0) {
        const std::size_t gi = num_rois - 1;
        for (std::size_t i = 0; i < num_rois; ++i) {
            adj.g.at(gi, i) = 1.0;
            adj.g.at(i, gi) = 1.0;
        }
    }
    return adj;
}

namespace {

void verify_relation_matrix(const BoolRelationMatrix& m, const std::string& path) {
    const std::size_t c = m.au_order.size();
    for (std::size_t i = 0; i < c; ++i) {
        if (m.m.at(i, i) != 1.0) {
            throw std::runtime_error("relation matrix '" + path + "': diagonal entry " +
                                     std::to_string(i) + " is not 1");
        }
        for (std::size_t j = 0; j < c; ++j) {
            if (m.m.at(i, j) != m.m.at(j, i)) {
                throw std::runtime_error("relation matrix '" + path + "' is not symmetric at (" +
                                         std::to_string(i) + "," + std::to_string(j) + ")");
            }
        }
    }
}

}  // namespace

BoolRelationMatrix load_mbool(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open relation matrix '" + path + "'");
    std::string header;
    while (std::getline(in, header)) {
        auto pos = header.find('#');
        if (pos != std::string::npos) header = header.substr(0, pos);
        if (header.find_first_not_of(" \t\r") != std::string::npos) break;
    }
    BoolRelationMatrix out;
    {
        std::stringstream ss(header);
        int au;
        while (ss >> au) out.au_order.push_back(au);
    }
    const std::size_t c = out.au_order.size();
    if (c == 0) throw std::runtime_error("relation matrix '" + path + "' has an empty header");
    out.m = Tensor({c, c});
    for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            int v;
            if (!(in >> v) || (v != 0 && v != 1)) {
                throw std::runtime_error("relation matrix '" + path + "': bad entry at row " +
                                         std::to_string(i));
            }
            out.m.at(i, j) = v;
        }
    }
    verify_relation_matrix(out, path);
    return out;
}

void save_mbool(const std::string& path, const BoolRelationMatrix& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    const std::size_t c = m.au_order.size();
    for (std::size_t i = 0; i < c; ++i) out << (i ? " " : "") << m.au_order[i];
    out << "\n";
    for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = 0; j < c; ++j)
            out << (j ? " " : "") << static_cast<int>(m.m.at(i, j));
        out << "\n";
    }
}

void save_adjacency(const std::string& path, const AdjacencyMatrix& adj,
                    const std::vector<std::string>& names) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    const std::size_t r = adj.g.dim(0);
    if (names.size() != r) throw std::invalid_argument("node name count != adjacency size");
    out << "# mode=" << adjacency_mode_name(adj.mode) << "\n";
    for (std::size_t i = 0; i < r; ++i) out << (i ? " " : "") << names[i];
    out << "\n";
    out.precision(17);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < r; ++j) out << (j ? " " : "") << adj.g.at(i, j);
        out << "\n";
    }
}

AdjacencyMatrix load_adjacency(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open adjacency '" + path + "'");
    AdjacencyMatrix adj;
    std::string line;
    std::vector<std::string> names;
    while (std::getline(in, line)) {
        if (line.rfind("# mode=", 0) == 0) {
            adj.mode = adjacency_mode_from_name(line.substr(7));
            continue;
        }
        auto pos = line.find('#');
        if (pos != std::string::npos) line = line.substr(0, pos);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::stringstream ss(line);
        std::string tok;
        while (ss >> tok) names.push_back(tok);
        break;
    }
    const std::size_t r = names.size();
    if (r == 0) throw std::runtime_error("adjacency '" + path + "' has an empty header");
    adj.g = Tensor({r, r});
    for (std::size_t i = 0; i < r * r; ++i) {
        if (!(in >> adj.g[i])) {
            throw std::runtime_error("adjacency '" + path + "' is truncated");
        }
    }
    return adj;
}

std::vector<std::string> node_names(const RoiLayout& layout) {
    std::vector<std::string> names;
    names.reserve(layout.num_rois());
    for (const RoiSpec& roi : layout.rois) {
        if (roi.kind == RoiSpec::Kind::global) {
            names.push_back("FACE");
            continue;
        }
        std::string n = "AU" + std::to_string(roi.anchor_au);
        switch (roi.laterality) {
            case Laterality::left: n += 'L'; break;
            case Laterality::right: n += 'R'; break;
            case Laterality::up: n += 'U'; break;
            case Laterality::down: n += 'D'; break;
            case Laterality::none: break;
        }
        if (roi.au_ids.size() > 1) n += '+';
        names.push_back(std::move(n));
    }
    return names;
}

}  // namespace augcn
