#pragma once

#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hsel/common/combinatorics.hpp"
#include "hsel/common/error.hpp"

namespace hsel {

inline std::string join_tuple(std::span<const int> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

inline std::vector<int> split_tuple(const std::string& s) {
  std::vector<int> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw DomainError("malformed tuple key '" + s + "'");
    }
  }
  return out;
}

// Deterministic map from a joint parent configuration to a target value.
// Table is row-major over parent supports, first parent most significant.
// Entry -1 marks a tuple outside the function's domain (learned functions only).
struct SelectionFunction {
  static constexpr int kOutside = -1;

  int target = -1;
  std::vector<int> parents;
  std::vector<int> parent_supports;
  std::vector<int> table;

  Radix radix() const { return Radix(parent_supports); }

  bool total() const {
    for (int v : table)
      if (v == kOutside) return false;
    return true;
  }

  int lookup(std::uint64_t code) const { return table.at(code); }
};

inline int apply_selection(const SelectionFunction& f, std::span<const int> parent_values) {
  if (parent_values.size() != f.parent_supports.size())
    throw DomainError("domain miss: tuple (" + join_tuple(parent_values) + ") has wrong arity");
  for (std::size_t i = 0; i < parent_values.size(); ++i)
    if (parent_values[i] < 0 || parent_values[i] >= f.parent_supports[i])
      throw DomainError("domain miss: tuple (" + join_tuple(parent_values) + ") outside parent supports");
  int v = f.table.at(f.radix().encode(parent_values));
  if (v == SelectionFunction::kOutside)
    throw DomainError("domain miss: tuple (" + join_tuple(parent_values) + ") not in function domain");
  return v;
}

inline SelectionFunction make_selection(int target, std::vector<int> parents, std::vector<int> parent_supports,
                                        std::vector<int> table) {
  SelectionFunction f{target, std::move(parents), std::move(parent_supports), std::move(table)};
  if (f.parents.size() != f.parent_supports.size()) throw DomainError("parent/support arity mismatch");
  if (f.table.size() != f.radix().size()) throw DomainError("selection table size does not match parent product");
  return f;
}

}  // namespace hsel
