#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "elastic/network.hpp"

namespace elastic {

struct CostRow {
  std::size_t exit = 0;        // 1-based ordinal within the network
  std::size_t anchor = 0;      // backbone anchor ordinal
  std::size_t conv_depth = 0;  // conv layers on the path to the anchor
  std::uint64_t params = 0;    // backbone prefix + this exit's head
  std::uint64_t flops = 0;     // one forward pass to this exit
};

struct CostTable {
  std::vector<CostRow> rows;
};

enum class BudgetMetric { flops, params };

struct Budget {
  double limit = 0.0;
  BudgetMetric metric = BudgetMetric::flops;
};

/// Sums layer formulas over the ancestors of each exit plus its head.
/// Throws GraphError if the per-layer formulas and the stored parameter
/// tensors disagree.
CostTable cost_audit(const ElasticNetwork& net);

/// Parameter count of backbone + final head, by enumeration.
std::uint64_t whole_network_parameters(const ElasticNetwork& net);

/// Deepest exit whose cost is <= limit. Throws BudgetInfeasibleError when
/// none fits and ContractViolation for an empty or non-monotone table.
std::size_t select_exit(const CostTable& table, const Budget& budget);

std::string format_cost_table(const CostTable& table);
std::string cost_table_csv(const CostTable& table);

}  // namespace elastic
