#include "augcn/metrics.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace augcn {

namespace {

void check_batch(const Tensor& scores, const Tensor& labels, const char* who) {
    if (scores.rank() != 2 || labels.rank() != 2) {
        throw std::invalid_argument(std::string(who) + ": expected N x C matrices");
    }
    if (!scores.same_shape(labels)) {
        throw std::invalid_argument(std::string(who) + ": scores " + scores.shape_str() +
                                    " vs labels " + Tensor::shape_str(labels.shape()));
    }
    if (scores.dim(0) == 0) throw std::invalid_argument(std::string(who) + ": empty batch");
}

}  // namespace

F1Result f1_scores(const Tensor& scores, const Tensor& labels, double threshold) {
    check_batch(scores, labels, "f1_scores");
    if (threshold <= 0.0 || threshold >= 1.0) {
        throw std::invalid_argument("f1_scores: threshold must be in (0, 1)");
    }
    const std::size_t n = scores.dim(0), c = scores.dim(1);
    F1Result out;
    out.threshold = threshold;
    out.per_au.resize(c, 0.0);
    out.counts.resize(c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
        ConfusionCounts& k = out.counts[j];
        for (std::size_t i = 0; i < n; ++i) {
            const bool pred = scores.at(i, j) >= threshold;
            const bool pos = labels.at(i, j) != 0.0;
            if (pred && pos)
                ++k.tp;
            else if (pred && !pos)
                ++k.fp;
            else if (!pred && pos)
                ++k.fn;
            else
                ++k.tn;
        }
        const double p = k.tp + k.fp > 0 ? static_cast<double>(k.tp) / (k.tp + k.fp) : 0.0;
        const double r = k.tp + k.fn > 0 ? static_cast<double>(k.tp) / (k.tp + k.fn) : 0.0;
        out.per_au[j] = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
        total += out.per_au[j];
    }
    out.average = total / static_cast<double>(c);
    return out;
}

AucResult auc_scores(const Tensor& scores, const Tensor& labels) {
    check_batch(scores, labels, "auc_scores");
    const std::size_t n = scores.dim(0), c = scores.dim(1);
    AucResult out;
    out.per_au.resize(c);
    double total = 0.0;
    std::size_t defined = 0;
    std::vector<std::pair<double, bool>> column(n);
    for (std::size_t j = 0; j < c; ++j) {
        std::size_t pos = 0;
        for (std::size_t i = 0; i < n; ++i) {
            column[i] = {scores.at(i, j), labels.at(i, j) != 0.0};
            if (column[i].second) ++pos;
        }
        const std::size_t neg = n - pos;
        if (pos == 0 || neg == 0) {
            out.undefined_columns.push_back(j);
            continue;
        }
        // Rank statistic with average ranks over tie groups.
        std::sort(column.begin(), column.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        double rank_sum_pos = 0.0;
        std::size_t i = 0;
        while (i < n) {
            std::size_t k = i;
            while (k < n && column[k].first == column[i].first) ++k;
            const double avg_rank = 0.5 * static_cast<double>(i + 1 + k);  // 1-based
            for (std::size_t t = i; t < k; ++t) {
                if (column[t].second) rank_sum_pos += avg_rank;
            }
            i = k;
        }
        const double p = static_cast<double>(pos);
        const double auc = (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
        out.per_au[j] = auc;
        total += auc;
        ++defined;
    }
    if (defined > 0) out.average = total / static_cast<double>(defined);
    return out;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["num_samples"] = num_samples;
    j["threshold"] = f1.threshold;
    j["avg_f1"] = f1.average;
    if (auc.average) j["avg_auc"] = *auc.average;
    nlohmann::json per;
    for (std::size_t i = 0; i < au_ids.size(); ++i) {
        nlohmann::json a;
        a["au"] = au_ids[i];
        a["f1"] = f1.per_au[i];
        if (auc.per_au[i])
            a["auc"] = *auc.per_au[i];
        else
            a["auc"] = nullptr;
        a["tp"] = f1.counts[i].tp;
        a["fp"] = f1.counts[i].fp;
        a["fn"] = f1.counts[i].fn;
        a["tn"] = f1.counts[i].tn;
        per.push_back(a);
    }
    j["per_au"] = per;
    nlohmann::json run;
    run["config"] = config_name;
    run["lambda1"] = lambda1;
    run["lambda2"] = lambda2;
    run["dice_epsilon"] = dice_epsilon;
    run["learning_rate"] = learning_rate;
    run["adjacency_mode"] = adjacency_mode;
    run["seed"] = seed;
    j["run"] = run;
    return j.dump(2);
}

std::string EvalReport::to_text() const {
    std::ostringstream os;
    os.precision(4);
    os << std::fixed;
    os << "AU      F1      AUC     TP     FP     FN     TN\n";
    for (std::size_t i = 0; i < au_ids.size(); ++i) {
        os << "AU" << au_ids[i] << "\t" << f1.per_au[i] << "\t";
        if (auc.per_au[i])
            os << *auc.per_au[i];
        else
            os << "n/a   ";
        os << "\t" << f1.counts[i].tp << "\t" << f1.counts[i].fp << "\t" << f1.counts[i].fn
           << "\t" << f1.counts[i].tn << "\n";
    }
    os << "Avg\t" << f1.average << "\t";
    if (auc.average)
        os << *auc.average;
    else
        os << "n/a";
    os << "\t(threshold " << f1.threshold << ", " << num_samples << " samples)\n";
    return os.str();
}

}  // namespace augcn
