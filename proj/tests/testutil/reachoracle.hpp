#pragma once

// Brute-force reachability oracle: exhaustive enumeration of simple paths.
// Deliberately independent of the scanner's traversal code.

#include <random>
#include <set>
#include <vector>

namespace testutil {

struct RandomDigraph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;
  std::set<int> roots;
  std::set<int> targets;
};

inline RandomDigraph random_digraph(std::mt19937& rng, int max_nodes = 12) {
  RandomDigraph g;
  g.n = 1 + static_cast<int>(rng() % max_nodes);
  int edge_count = static_cast<int>(rng() % (g.n * 2 + 1));
  for (int i = 0; i < edge_count; ++i) {
    int a = static_cast<int>(rng() % g.n);
    int b = static_cast<int>(rng() % g.n);  // self-loops and cycles allowed
    g.edges.emplace_back(a, b);
  }
  int root_count = 1 + static_cast<int>(rng() % g.n);
  for (int i = 0; i < root_count; ++i) g.roots.insert(static_cast<int>(rng() % g.n));
  int target_count = static_cast<int>(rng() % (g.n + 1));
  for (int i = 0; i < target_count; ++i) g.targets.insert(static_cast<int>(rng() % g.n));
  return g;
}

/// All nodes that terminate some enumerated simple path from a root.
inline std::set<int> oracle_reachable(const RandomDigraph& g) {
  std::vector<std::vector<int>> adj(g.n);
  for (auto [a, b] : g.edges) adj[a].push_back(b);
  std::set<int> reached;
  struct Frame {
    std::vector<int> path;
  };
  for (int root : g.roots) {
    std::vector<std::vector<int>> stack{{root}};
    while (!stack.empty()) {
      std::vector<int> path = std::move(stack.back());
      stack.pop_back();
      reached.insert(path.back());
      for (int next : adj[path.back()]) {
        bool seen = false;
        for (int p : path)
          if (p == next) {
            seen = true;
            break;
          }
        if (seen) continue;  // a simple path never revisits
        std::vector<int> extended = path;
        extended.push_back(next);
        stack.push_back(std::move(extended));
      }
    }
  }
  return reached;
}

}  // namespace testutil
