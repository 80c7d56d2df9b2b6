#include <algorithm>
#include <cstdio>
#include <fstream>

#include "nudge/errors.hpp"
#include "nudge/sim_harness.hpp"

namespace nudge::sim {
namespace {

std::string fixed(double value, int decimals = 2) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return buf;
}

std::string pct(int part, int total) {
    if (total == 0) return "0.00";
    return fixed(double(part) / double(total) * 100.0);
}

const ArmStats& stats_of(const TrialReport& report, TrialArm arm) {
    static const ArmStats empty;
    auto it = report.arms.find(arm);
    return it == report.arms.end() ? empty : it->second;
}

}  // namespace

void emit_report(const TrialReport& report, const std::filesystem::path& dir,
                 bool svg) {
    std::filesystem::create_directories(dir);

    const ArmStats& none = stats_of(report, TrialArm::None);
    const ArmStats& lt = stats_of(report, TrialArm::NudgeLT);
    const ArmStats& full = stats_of(report, TrialArm::NudgeFULL);

    {
        std::ofstream out(dir / "report.txt");
        if (!out) throw Error("cannot write report.txt under " + dir.string());
        out << "Comparison of average pull request lifetime (hours)\n";
        out << "service      avg_lifetime  prs    censored  reduction_vs_none\n";
        out << "none         " << fixed(none.avg_lifetime_hours) << "        "
            << none.pr_count << "   " << none.censored << "        -\n";
        out << "nudge-lt     " << fixed(lt.avg_lifetime_hours) << "        "
            << lt.pr_count << "   " << lt.censored << "        "
            << fixed(report.reduction_lt_pct) << "%\n";
        out << "nudge-full   " << fixed(full.avg_lifetime_hours) << "        "
            << full.pr_count << "   " << full.censored << "        "
            << fixed(report.reduction_full_pct) << "%\n";
        out << "\n";

        out << "Completed pull requests after a notification\n";
        out << "service      <=1d   <=3d   <=1w   >1w   notified_closed\n";
        for (TrialArm arm : {TrialArm::NudgeLT, TrialArm::NudgeFULL}) {
            auto it = report.buckets.find(arm);
            const CompletionBuckets buckets =
                it == report.buckets.end() ? CompletionBuckets{} : it->second;
            out << (arm == TrialArm::NudgeLT ? "nudge-lt     " : "nudge-full   ")
                << buckets.within_one_day << "   " << buckets.within_three_days
                << "   " << buckets.within_one_week << "   " << buckets.over_one_week
                << "   " << buckets.total() << "\n";
        }
        out << "\n";

        out << "Notification resolutions\n";
        out << "service      positive  negative  none   positive_rate\n";
        for (TrialArm arm : {TrialArm::NudgeLT, TrialArm::NudgeFULL}) {
            auto it = report.resolutions.find(arm);
            const ResolutionStats res =
                it == report.resolutions.end() ? ResolutionStats{} : it->second;
            out << (arm == TrialArm::NudgeLT ? "nudge-lt     " : "nudge-full   ")
                << res.positive << "      " << res.negative << "      " << res.none
                << "    " << fixed(res.positive_rate * 100.0) << "%\n";
        }
    }

    {
        std::ofstream out(dir / "report.csv");
        if (!out) throw Error("cannot write report.csv under " + dir.string());
        out << "section,arm,metric,value\n";
        const auto arm_row = [&](TrialArm arm, const ArmStats& stats) {
            out << "lifetime," << to_string(arm) << ",avg_lifetime_hours,"
                << fixed(stats.avg_lifetime_hours, 4) << "\n";
            out << "lifetime," << to_string(arm) << ",pr_count," << stats.pr_count << "\n";
            out << "lifetime," << to_string(arm) << ",censored," << stats.censored << "\n";
        };
        arm_row(TrialArm::None, none);
        arm_row(TrialArm::NudgeLT, lt);
        arm_row(TrialArm::NudgeFULL, full);
        out << "lifetime,nudge-lt,reduction_pct," << fixed(report.reduction_lt_pct, 4) << "\n";
        out << "lifetime,nudge-full,reduction_pct," << fixed(report.reduction_full_pct, 4)
            << "\n";
        for (TrialArm arm : {TrialArm::NudgeLT, TrialArm::NudgeFULL}) {
            auto bucket_it = report.buckets.find(arm);
            const CompletionBuckets buckets =
                bucket_it == report.buckets.end() ? CompletionBuckets{} : bucket_it->second;
            out << "buckets," << to_string(arm) << ",within_one_day,"
                << buckets.within_one_day << "\n";
            out << "buckets," << to_string(arm) << ",within_three_days,"
                << buckets.within_three_days << "\n";
            out << "buckets," << to_string(arm) << ",within_one_week,"
                << buckets.within_one_week << "\n";
            out << "buckets," << to_string(arm) << ",over_one_week,"
                << buckets.over_one_week << "\n";
            out << "buckets," << to_string(arm) << ",pct_within_one_day,"
                << pct(buckets.within_one_day, buckets.total()) << "\n";
            out << "buckets," << to_string(arm) << ",pct_over_one_week,"
                << pct(buckets.over_one_week, buckets.total()) << "\n";
            auto res_it = report.resolutions.find(arm);
            const ResolutionStats res =
                res_it == report.resolutions.end() ? ResolutionStats{} : res_it->second;
            out << "resolutions," << to_string(arm) << ",positive," << res.positive << "\n";
            out << "resolutions," << to_string(arm) << ",negative," << res.negative << "\n";
            out << "resolutions," << to_string(arm) << ",none," << res.none << "\n";
            out << "resolutions," << to_string(arm) << ",positive_rate_pct,"
                << fixed(res.positive_rate * 100.0, 4) << "\n";
        }
    }

    if (svg) {
        std::ofstream out(dir / "buckets.svg");
        if (!out) throw Error("cannot write buckets.svg under " + dir.string());
        auto it = report.buckets.find(TrialArm::NudgeFULL);
        const CompletionBuckets buckets =
            it == report.buckets.end() ? CompletionBuckets{} : it->second;
        const int values[4] = {buckets.within_one_day, buckets.within_three_days,
                               buckets.within_one_week, buckets.over_one_week};
        const char* labels[4] = {"<=1d", "<=3d", "<=1w", ">1w"};
        int peak = 1;
        for (int v : values) peak = std::max(peak, v);
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"320\" height=\"200\">\n";
        for (int i = 0; i < 4; ++i) {
            const int h = int(150.0 * values[i] / peak);
            out << "  <rect x=\"" << 30 + i * 70 << "\" y=\"" << 170 - h
                << "\" width=\"50\" height=\"" << h << "\" fill=\"#4878a8\"/>\n";
            out << "  <text x=\"" << 55 + i * 70
                << "\" y=\"185\" font-size=\"11\" text-anchor=\"middle\">" << labels[i]
                << "</text>\n";
            out << "  <text x=\"" << 55 + i * 70 << "\" y=\"" << 165 - h
                << "\" font-size=\"11\" text-anchor=\"middle\">" << values[i]
                << "</text>\n";
        }
        out << "</svg>\n";
    }
}

}  // namespace nudge::sim
