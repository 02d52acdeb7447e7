#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "divrep/tensor.hpp"

namespace divrep::ag {

// Reverse-mode tape node. Graphs are built per training step and freed when
// the step's Vars go out of scope; parameter nodes are long-lived leaves.
template <class T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  bool grad_ready = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Tensor<T>& ensure_grad() {
    if (!grad_ready) {
      grad = Tensor<T>(value.shape, T(0));
      grad_ready = true;
    }
    return grad;
  }
  void zero_grad() {
    if (grad_ready) grad.fill(T(0));
  }
};

template <class T>
using Var = std::shared_ptr<Node<T>>;

template <class T>
Var<T> leaf(Tensor<T> value, bool requires_grad = false) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

template <class T>
Var<T> constant(Tensor<T> value) {
  return leaf<T>(std::move(value), false);
}

template <class T>
Var<T> param(Tensor<T> value) {
  return leaf<T>(std::move(value), true);
}

// New leaf sharing the value but cut from the graph.
template <class T>
Var<T> detach(const Var<T>& v) {
  return leaf<T>(v->value, false);
}

template <class T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents, std::function<void(Node<T>&)> bwd) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  for (auto& p : parents)
    if (p->requires_grad) n->requires_grad = true;
  n->parents = std::move(parents);
  if (n->requires_grad) n->backward_fn = std::move(bwd);
  return n;
}

// Iterative postorder topological sort over parents.
template <class T>
std::vector<Node<T>*> topo_order(Node<T>* root) {
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // parents before children
}

template <class T>
void backward(const Var<T>& root) {
  DIVREP_CHECK(root->value.numel() == 1, "backward root must be scalar");
  if (!root->requires_grad) return;
  auto order = topo_order<T>(root.get());
  for (Node<T>* n : order) n->zero_grad();
  root->ensure_grad()[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && n->grad_ready) n->backward_fn(*n);
  }
}

}  // namespace divrep::ag
