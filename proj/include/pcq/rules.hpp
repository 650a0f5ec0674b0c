#pragma once

#include <array>
#include <string>
#include <string_view>

namespace pcq::rules {

// One row of the tractability rule base: the structural input conditions under
// which an operation (or query) is tractable, what it guarantees on its output,
// its complexity, and the hardness class when the named condition is missing.
struct Row {
  std::string_view id;
  std::string_view name;
  std::string_view input_conditions;
  std::string_view output_conditions;
  std::string_view complexity;
  std::string_view missing_condition;
  std::string_view hardness;

  std::string citation() const { return std::string(name) + ": " + std::string(hardness); }
};

inline constexpr std::array<Row, 7> kOperationRows{{
    {"sum", "Sum", "(+Cmp)", "Dec (+SD)", "O(|p|+|q|)", "Det", "NP-hard for Det out"},
    {"product", "Product", "Cmp (+Det, +SD)", "Dec (+Det, +SD)", "O(|p||q|)", "Cmp", "#P-hard w/o Cmp"},
    {"power_natural", "Power (natural)", "SD (+Det)", "SD (+Det)", "O(|p|^n)", "SD", "#P-hard w/o SD"},
    {"power_real", "Power (real)", "Sm, Dec, Det (+SD)", "Sm, Dec, Det (+SD)", "O(|p|)", "Det",
     "#P-hard w/o Det"},
    {"quotient", "Quotient", "Cmp; q Det (+p Det, +SD)", "Dec (+Det, +SD)", "O(|p||q|)", "Det",
     "#P-hard w/o Det"},
    {"log", "Log", "Sm, Dec, Det", "Sm, Dec", "O(|p|)", "Det", "#P-hard w/o Det"},
    {"exp", "Exp", "linear", "SD", "O(|p|)", "linear", "#P-hard"},
}};

inline constexpr std::array<Row, 11> kQueryRows{{
    {"cross_entropy", "Cross Entropy", "Cmp, q Det", "", "O(|p||q|)", "Det", "#P-hard w/o Det"},
    {"shannon_entropy", "Shannon Entropy", "Sm, Dec, Det", "", "O(|p|)", "Det", "coNP-hard w/o Det"},
    {"renyi_natural", "Renyi Entropy (natural alpha)", "SD", "", "O(|p|^alpha)", "SD", "#P-hard w/o SD"},
    {"renyi_real", "Renyi Entropy (real alpha)", "Sm, Dec, Det", "", "O(|p|)", "Det", "#P-hard w/o Det"},
    {"mutual_information", "Mutual Information", "Sm, SD, Det (marginal Det)", "", "O(|p|)", "SD",
     "coNP-hard w/o SD"},
    {"kld", "Kullback-Leibler Div.", "Cmp, Det", "", "O(|p||q|)", "Det", "#P-hard w/o Det"},
    {"alpha_natural", "Renyi Alpha Div. (natural alpha)", "Cmp, q Det", "", "O(|p|^alpha|q|)", "Det",
     "#P-hard w/o Det"},
    {"alpha_real", "Renyi Alpha Div. (real alpha)", "Cmp, Det", "", "O(|p||q|)", "Det", "#P-hard w/o Det"},
    {"itakura_saito", "Itakura-Saito Div.", "Cmp, Det", "", "O(|p||q|)", "Det", "#P-hard w/o Det"},
    {"cauchy_schwarz", "Cauchy-Schwarz Div.", "Cmp", "", "O(|p||q|+|p|^2+|q|^2)", "Cmp", "#P-hard w/o Cmp"},
    {"squared_loss", "Squared Loss", "Cmp", "", "O(|p||q|+|p|^2+|q|^2)", "Cmp", "#P-hard w/o Cmp"},
}};

// Throws std::out_of_range for an unknown id.
const Row &operation_row(std::string_view id);
const Row &query_row(std::string_view id);

inline std::string op_citation(std::string_view id) { return operation_row(id).citation(); }
inline std::string query_citation(std::string_view id) { return query_row(id).citation(); }

}  // namespace pcq::rules
