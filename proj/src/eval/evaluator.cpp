#include "semdet/eval/evaluator.hpp"

#include "semdet/common/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace semdet::eval {

std::vector<double> default_iou_thresholds()
{
    std::vector<double> t;
    for (int i = 0; i < 10; ++i) {
        t.push_back((50 + 5 * i) / 100.0);
    }
    return t;
}

void EvalConfig::validate() const
{
    if (iou_thresholds.empty()) {
        throw ValidationFailure("eval config: no IoU thresholds");
    }
    for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
        const double t = iou_thresholds[i];
        if (!(t > 0.0 && t <= 1.0)) {
            throw ValidationFailure("eval config: IoU threshold " + std::to_string(t) + " outside (0, 1]");
        }
        if (i > 0 && !(t > iou_thresholds[i - 1])) {
            throw ValidationFailure("eval config: IoU thresholds must be strictly increasing");
        }
    }
    if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
        throw ValidationFailure("eval config: confidence threshold outside [0, 1]");
    }
}

double iou(const Box& a, const Box& b)
{
    if (!(a.w > 0 && a.h > 0 && b.w > 0 && b.h > 0)) {
        return 0.0;
    }
    const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
    const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
    if (iw <= 0 || ih <= 0) {
        return 0.0;
    }
    const double inter = iw * ih;
    // ordered sum keeps iou(a, b) == iou(b, a) bit for bit under FMA contraction
    const double sa = a.area(), sb = b.area();
    return std::clamp(inter / (std::max(sa, sb) + std::min(sa, sb) - inter), 0.0, 1.0);
}

MatchResult match_detections(std::span<const Detection> dets, std::span<const Box> gts, double iou_thr,
                             double confidence_thr)
{
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < dets.size(); ++i) {
        if (dets[i].score > confidence_thr) {
            order.push_back(i);
        }
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

    MatchResult out;
    std::vector<char> taken(gts.size(), 0);
    for (std::size_t i : order) {
        int best = -1;
        double best_iou = iou_thr;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (taken[g]) {
                continue;
            }
            const double v = iou(dets[i].box, gts[g]);
            if (v >= best_iou && (best < 0 || v > best_iou)) {
                best = static_cast<int>(g);
                best_iou = v;
            }
        }
        if (best >= 0) {
            taken[static_cast<std::size_t>(best)] = 1;
        }
        out.detections.push_back({dets[i].score, best >= 0});
    }
    out.false_negatives = static_cast<int>(std::count(taken.begin(), taken.end(), 0));
    return out;
}

std::optional<double> average_precision(std::vector<LabeledDetection> dets, int total_gt)
{
    if (total_gt <= 0) {
        return std::nullopt;
    }
    std::stable_sort(dets.begin(), dets.end(),
                     [](const LabeledDetection& a, const LabeledDetection& b) { return a.score > b.score; });
    const std::size_t n = dets.size();
    std::vector<long> tp_cum(n);
    std::vector<double> precision(n);
    long tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        tp += dets[i].true_positive ? 1 : 0;
        tp_cum[i] = tp;
        precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    }
    // precision envelope: max precision at any later point
    for (std::size_t i = n; i-- > 1;) {
        precision[i - 1] = std::max(precision[i - 1], precision[i]);
    }
    double sum = 0.0;
    std::size_t k = 0;
    for (int r = 0; r <= 100; ++r) {
        // first point with recall >= r/100, compared exactly as tp*100 >= r*gt
        while (k < n && tp_cum[k] * 100 < static_cast<long>(r) * total_gt) {
            ++k;
        }
        if (k == n) {
            break;
        }
        sum += precision[k];
    }
    return sum / 101.0;
}

EvalReport evaluate(const synth::DatasetManifest& manifest, const codec::DetectionTable& detections,
                    const EvalConfig& cfg)
{
    cfg.validate();
    const int num_classes = manifest.num_classes();
    for (const auto& [name, dets] : detections) {
        const bool known = std::any_of(manifest.entries.begin(), manifest.entries.end(),
                                       [&](const synth::ManifestEntry& e) { return e.image == name; });
        if (!known) {
            throw UnknownImage("detections reference image '" + name + "', which is not in the " +
                               std::string(synth::split_name(manifest.split)) + " split");
        }
        for (const auto& d : dets) {
            if (d.class_id < 0 || d.class_id >= num_classes) {
                throw ValidationFailure("detection on image '" + name + "' has unknown class " +
                                        std::to_string(d.class_id));
            }
        }
    }

    EvalReport report;
    report.config = cfg;
    report.num_images = static_cast<int>(manifest.entries.size());
    const std::size_t nt = cfg.iou_thresholds.size();

    for (int c = 0; c < num_classes; ++c) {
        ClassReport cr;
        cr.class_id = c;
        cr.name = manifest.class_names[static_cast<std::size_t>(c)];
        std::vector<std::vector<LabeledDetection>> pooled(nt);
        for (const auto& entry : manifest.entries) {
            std::vector<Box> gts;
            for (const auto& a : entry.boxes) {
                if (a.class_id == c) {
                    gts.push_back(a.box);
                }
            }
            cr.num_gt += static_cast<int>(gts.size());
            std::vector<Detection> dets;
            if (auto it = detections.find(entry.image); it != detections.end()) {
                for (const auto& d : it->second) {
                    if (d.class_id == c) {
                        dets.push_back(d);
                    }
                }
            }
            for (std::size_t t = 0; t < nt; ++t) {
                const MatchResult m = match_detections(dets, gts, cfg.iou_thresholds[t], cfg.confidence_threshold);
                pooled[t].insert(pooled[t].end(), m.detections.begin(), m.detections.end());
                if (t == 0) {
                    for (const auto& d : m.detections) {
                        (d.true_positive ? cr.tp : cr.fp) += 1;
                    }
                    cr.fn += m.false_negatives;
                }
            }
        }
        if (cr.num_gt > 0) {
            for (std::size_t t = 0; t < nt; ++t) {
                cr.ap.push_back(*average_precision(std::move(pooled[t]), cr.num_gt));
            }
            cr.ap50 = cr.ap.front();
            cr.ap_mean = std::accumulate(cr.ap.begin(), cr.ap.end(), 0.0) / static_cast<double>(nt);
        } else {
            report.flags.push_back("class '" + cr.name + "' has no ground truth in this split; excluded from mAP");
        }
        report.classes.push_back(std::move(cr));
    }

    int scored = 0;
    for (const auto& cr : report.classes) {
        if (cr.scored()) {
            report.map50 += cr.ap50;
            report.map50_95 += cr.ap_mean;
            ++scored;
        }
    }
    if (scored > 0) {
        report.map50 /= scored;
        report.map50_95 /= scored;
    } else {
        report.flags.push_back("no class has ground truth; mAP reported as 0");
    }
    return report;
}

nlohmann::json to_json(const EvalConfig& cfg)
{
    return {{"iou_thresholds", cfg.iou_thresholds}, {"confidence_threshold", cfg.confidence_threshold}};
}

nlohmann::json to_json(const EvalReport& report)
{
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& cr : report.classes) {
        nlohmann::json j{{"class_id", cr.class_id}, {"name", cr.name}, {"num_gt", cr.num_gt},
                         {"scored", cr.scored()}, {"tp", cr.tp},         {"fp", cr.fp},
                         {"fn", cr.fn}};
        if (cr.scored()) {
            j["ap"] = cr.ap;
            j["ap50"] = cr.ap50;
            j["ap50_95"] = cr.ap_mean;
        }
        classes.push_back(std::move(j));
    }
    return {{"config", to_json(report.config)},
            {"num_images", report.num_images},
            {"classes", classes},
            {"map50", report.map50},
            {"map50_95", report.map50_95},
            {"flags", report.flags}};
}

std::string to_csv(const EvalReport& report)
{
    std::ostringstream os;
    os.precision(6);
    os << std::fixed;
    os << "class,num_gt,ap50_95,ap50,tp,fp,fn\n";
    for (const auto& cr : report.classes) {
        os << cr.name << ',' << cr.num_gt << ',';
        if (cr.scored()) {
            os << cr.ap_mean << ',' << cr.ap50;
        } else {
            os << "n/a,n/a";
        }
        os << ',' << cr.tp << ',' << cr.fp << ',' << cr.fn << '\n';
    }
    os << "mAP,,";
    os << report.map50_95 << ',' << report.map50 << ",,,\n";
    return os.str();
}

} // namespace semdet::eval
