#include "elastic/budget.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace elastic {
namespace {

std::uint64_t cost_of(const CostRow& row, BudgetMetric metric) {
  return metric == BudgetMetric::flops ? row.flops : row.params;
}

}  // namespace

CostTable cost_audit(const ElasticNetwork& net) {
  const auto& g = net.backbone();
  CostTable table;
  for (std::size_t i = 1; i <= net.exit_count(); ++i) {
    const auto& e = net.exit(i);
    const auto mask = g.ancestors(e.node);
    const std::uint64_t formula = g.formula_parameters(mask);
    const std::uint64_t counted = g.enumerated_parameters(mask);
    if (formula != counted) {
      throw GraphError("exit " + std::to_string(i) + ": formula count " + std::to_string(formula) +
                       " != enumerated count " + std::to_string(counted));
    }
    const std::uint64_t head = head_parameter_count(e.features, net.classes());
    if (head != e.parameter_count()) throw GraphError("exit head parameter tensors disagree");
    CostRow row;
    row.exit = i;
    row.anchor = e.anchor;
    row.conv_depth = g.conv_depth(e.node);
    row.params = formula + head;
    row.flops = g.flops(mask) + head_flop_count(e.features, net.classes());
    table.rows.push_back(row);
  }
  return table;
}

std::uint64_t whole_network_parameters(const ElasticNetwork& net) {
  const auto& g = net.backbone();
  return g.enumerated_parameters(std::vector<bool>(g.size(), true)) +
         net.exit(net.exit_count()).parameter_count();
}

std::size_t select_exit(const CostTable& table, const Budget& budget) {
  if (table.rows.empty()) throw ContractViolation("select_exit on an empty cost table");
  if (!(budget.limit >= 0.0)) throw ContractViolation("budget limit must be >= 0");
  const auto& rows = table.rows;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (cost_of(rows[i], budget.metric) <= cost_of(rows[i - 1], budget.metric)) {
      throw ContractViolation("cost table is not strictly increasing");
    }
  }
  // Costs increase, so the feasible exits form a prefix.
  const auto past = std::partition_point(rows.begin(), rows.end(), [&](const CostRow& r) {
    return static_cast<double>(cost_of(r, budget.metric)) <= budget.limit;
  });
  if (past == rows.begin()) {
    throw BudgetInfeasibleError("no exit fits a budget of " + std::to_string(budget.limit) +
                                "; the cheapest costs " +
                                std::to_string(cost_of(rows.front(), budget.metric)));
  }
  return std::prev(past)->exit;
}

std::string format_cost_table(const CostTable& table) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%4s  %6s  %10s  %14s  %16s\n", "exit", "anchor", "conv_depth",
                "params", "flops");
  out << line;
  for (const auto& r : table.rows) {
    std::snprintf(line, sizeof line, "%4zu  %6zu  %10zu  %14llu  %16llu\n", r.exit, r.anchor,
                  r.conv_depth, static_cast<unsigned long long>(r.params),
                  static_cast<unsigned long long>(r.flops));
    out << line;
  }
  return out.str();
}

std::string cost_table_csv(const CostTable& table) {
  std::ostringstream out;
  out << "exit,conv_depth,params,flops\n";
  for (const auto& r : table.rows) {
    out << r.exit << ',' << r.conv_depth << ',' << r.params << ',' << r.flops << '\n';
  }
  return out.str();
}

}  // namespace elastic
