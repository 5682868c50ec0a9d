#include "cedqn/metrics.hpp"

#include <cstdio>
#include <sstream>

namespace cedqn {

std::string format_g6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return buf;
}

void write_metrics_csv(const MetricsLog& log, std::ostream& out) {
  out << "run_id,algo,team_id,task_size,seed,episode,steps,boxes_lifted,team_reward,"
         "discounted_return,mean_q_loss,mean_comm_loss,messages_sent,gate_rate\n";
  for (const EpisodeStats& e : log.episodes) {
    const double gate_rate =
        e.gate_decisions > 0 ? static_cast<double>(e.messages_sent) / e.gate_decisions : 0.0;
    out << log.run_id << ',' << algo_name(log.algo) << ',' << log.team_id << ','
        << log.task_size << ',' << log.seed << ',' << e.episode << ',' << e.steps << ','
        << e.boxes_lifted << ',' << format_g6(e.team_reward) << ','
        << format_g6(e.discounted_return) << ',' << format_g6(e.mean_q_loss) << ','
        << format_g6(e.mean_comm_loss) << ',' << e.messages_sent << ','
        << format_g6(gate_rate) << '\n';
  }
}

std::string metrics_csv(const MetricsLog& log) {
  std::ostringstream out;
  write_metrics_csv(log, out);
  return out.str();
}

void write_comparison_csv(std::span<const ComparisonRow> rows, std::ostream& out) {
  out << "algo,team_id,task_size,seed,mean_completion_steps,timeout_fraction,"
         "final_reward_ma\n";
  for (const ComparisonRow& r : rows) {
    out << algo_name(r.algo) << ',' << r.team_id << ',' << r.task_size << ',' << r.seed
        << ',';
    if (r.failed) {
      out << "error,error,error\n";
    } else {
      out << format_g6(r.mean_completion_steps) << ',' << format_g6(r.timeout_fraction)
          << ',' << format_g6(r.final_reward_ma) << '\n';
    }
  }
}

std::string comparison_csv(std::span<const ComparisonRow> rows) {
  std::ostringstream out;
  write_comparison_csv(rows, out);
  return out.str();
}

std::vector<double> moving_average(std::span<const double> values, int window) {
  std::vector<double> out(values.size());
  double running = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    running += values[i];
    if (i >= static_cast<size_t>(window)) running -= values[i - window];
    const int count = i + 1 < static_cast<size_t>(window) ? static_cast<int>(i + 1) : window;
    out[i] = running / count;
  }
  return out;
}

}  // namespace cedqn
