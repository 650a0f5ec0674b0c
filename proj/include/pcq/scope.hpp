#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace pcq {

// Set of variable ids (1-based) stored as a growable bitmask.
class ScopeSet {
 public:
  ScopeSet() = default;

  static ScopeSet single(uint32_t var) {
    ScopeSet s;
    s.insert(var);
    return s;
  }

  void insert(uint32_t var) {
    const std::size_t bit = var - 1;
    if (bit / 64 >= words_.size()) words_.resize(bit / 64 + 1, 0);
    words_[bit / 64] |= uint64_t{1} << (bit % 64);
  }

  void erase(uint32_t var) {
    const std::size_t bit = var - 1;
    if (bit / 64 < words_.size()) words_[bit / 64] &= ~(uint64_t{1} << (bit % 64));
    trim();
  }

  bool contains(uint32_t var) const {
    const std::size_t bit = var - 1;
    return bit / 64 < words_.size() && ((words_[bit / 64] >> (bit % 64)) & 1U) != 0;
  }

  bool empty() const { return words_.empty(); }

  std::size_t size() const {
    std::size_t n = 0;
    for (uint64_t w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  ScopeSet operator|(const ScopeSet &o) const {
    ScopeSet r = *this;
    r |= o;
    return r;
  }
  ScopeSet &operator|=(const ScopeSet &o) {
    if (o.words_.size() > words_.size()) words_.resize(o.words_.size(), 0);
    for (std::size_t i = 0; i < o.words_.size(); ++i) words_[i] |= o.words_[i];
    return *this;
  }
  ScopeSet operator&(const ScopeSet &o) const {
    ScopeSet r;
    const std::size_t n = std::min(words_.size(), o.words_.size());
    r.words_.resize(n);
    for (std::size_t i = 0; i < n; ++i) r.words_[i] = words_[i] & o.words_[i];
    r.trim();
    return r;
  }
  ScopeSet operator-(const ScopeSet &o) const {
    ScopeSet r = *this;
    for (std::size_t i = 0; i < std::min(r.words_.size(), o.words_.size()); ++i) r.words_[i] &= ~o.words_[i];
    r.trim();
    return r;
  }

  bool intersects(const ScopeSet &o) const {
    const std::size_t n = std::min(words_.size(), o.words_.size());
    for (std::size_t i = 0; i < n; ++i)
      if ((words_[i] & o.words_[i]) != 0) return true;
    return false;
  }

  bool subset_of(const ScopeSet &o) const { return (*this - o).empty(); }

  bool operator==(const ScopeSet &o) const = default;
  bool operator<(const ScopeSet &o) const {
    if (words_.size() != o.words_.size()) return words_.size() < o.words_.size();
    for (std::size_t i = words_.size(); i-- > 0;)
      if (words_[i] != o.words_[i]) return words_[i] < o.words_[i];
    return false;
  }

  // Ascending variable ids.
  std::vector<uint32_t> vars() const {
    std::vector<uint32_t> out;
    for (std::size_t w = 0; w < words_.size(); ++w) {
      uint64_t bits = words_[w];
      while (bits != 0) {
        const int b = std::countr_zero(bits);
        out.push_back(static_cast<uint32_t>(w * 64 + static_cast<std::size_t>(b) + 1));
        bits &= bits - 1;
      }
    }
    return out;
  }

  std::string to_string() const {
    std::string s = "{";
    bool first = true;
    for (uint32_t v : vars()) {
      if (!first) s += ",";
      s += "X" + std::to_string(v);
      first = false;
    }
    return s + "}";
  }

  std::size_t hash() const {
    std::size_t h = 0xcbf29ce484222325ULL;
    for (uint64_t w : words_) h = (h ^ std::hash<uint64_t>{}(w)) * 0x100000001b3ULL;
    return h;
  }

 private:
  void trim() {
    while (!words_.empty() && words_.back() == 0) words_.pop_back();
  }

  std::vector<uint64_t> words_;
};

}  // namespace pcq
