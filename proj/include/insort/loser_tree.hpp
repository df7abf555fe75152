#pragma once

#include <bit>
#include <cstddef>
#include <vector>

namespace insort {

// Tree of losers over `n` inputs. The tree only tracks input indices; the caller
// owns the current entry of each input and supplies `wins(a, b)`, which decides
// whether input a beats input b (ties must go to the lower index) and may
// re-encode the loser. Exhausted inputs act as sentinels that lose to every live
// input and are never handed to `wins`.
template <class Wins>
class LoserTree {
 public:
  LoserTree(std::size_t n, Wins wins) : n_(n), wins_(std::move(wins)) {
    cap_ = std::bit_ceil(n == 0 ? std::size_t{1} : n);
    live_.assign(cap_, false);
    for (std::size_t i = 0; i < n_; ++i) live_[i] = true;
    tree_.assign(cap_, 0);
  }

  std::size_t capacity() const { return cap_; }
  std::size_t inputs() const { return n_; }

  // Builds the tournament from the current entries.
  void build() { tree_[0] = play_subtree(1); }

  // Input index of the overall winner, or -1 when every input is exhausted.
  long winner() const {
    std::size_t w = tree_[0];
    return live_[w] ? static_cast<long>(w) : -1;
  }

  // The winner's entry was replaced; replay its leaf-to-root path.
  void replace_winner() { replay(tree_[0]); }

  // The winner's input ran dry.
  void exhaust_winner() {
    live_[tree_[0]] = false;
    replay(tree_[0]);
  }

  bool live(std::size_t i) const { return live_[i]; }

  // Marks an input empty before build().
  void mark_exhausted(std::size_t i) { live_[i] = false; }

 private:
  bool beats(std::size_t a, std::size_t b) {
    if (!live_[a] || !live_[b]) return live_[a] || (!live_[b] && a < b);
    return wins_(a, b);
  }

  std::size_t play_subtree(std::size_t node) {
    if (node >= cap_) return node - cap_;
    std::size_t l = play_subtree(2 * node);
    std::size_t r = play_subtree(2 * node + 1);
    if (beats(l, r)) {
      tree_[node] = r;
      return l;
    }
    tree_[node] = l;
    return r;
  }

  void replay(std::size_t cur) {
    for (std::size_t node = (cap_ + cur) / 2; node >= 1; node /= 2) {
      std::size_t opp = tree_[node];
      if (!beats(cur, opp)) {
        tree_[node] = cur;
        cur = opp;
      }
    }
    tree_[0] = cur;
  }

  std::size_t n_;
  std::size_t cap_;
  Wins wins_;
  std::vector<bool> live_;
  std::vector<std::size_t> tree_;
};

}  // namespace insort
