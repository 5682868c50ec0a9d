#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cedqn/training.hpp"

namespace cedqn {

// Floating-point fields print with 6 significant digits.
std::string format_g6(double value);

// Header: run_id,algo,team_id,task_size,seed,episode,steps,boxes_lifted,
// team_reward,discounted_return,mean_q_loss,mean_comm_loss,messages_sent,gate_rate
void write_metrics_csv(const MetricsLog& log, std::ostream& out);
std::string metrics_csv(const MetricsLog& log);

// Header: algo,team_id,task_size,seed,mean_completion_steps,timeout_fraction,
// final_reward_ma. Failed cells print "error" in the value fields.
void write_comparison_csv(std::span<const ComparisonRow> rows, std::ostream& out);
std::string comparison_csv(std::span<const ComparisonRow> rows);

// Trailing moving average with the reporting window used for learning curves.
std::vector<double> moving_average(std::span<const double> values, int window);

}  // namespace cedqn
