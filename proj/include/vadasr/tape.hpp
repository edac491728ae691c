#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "vadasr/tensor.hpp"

namespace vadasr {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// tape that produced it is alive.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Gradients of a scalar with respect to every leaf of the tape.
class Gradients {
 public:
  const Tensor& operator[](Var leaf) const;
  const Tensor& operator[](const std::string& name) const;
  const std::map<std::string, Tensor>& by_name() const { return named_; }

 private:
  friend class Tape;
  std::map<std::size_t, Tensor> by_id_;
  std::map<std::string, Tensor> named_;
};

// Receives the gradient flowing into the node's output and pushes
// contributions to its inputs through Tape::grad_of.
using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

// Linear record of primitive operations. Nodes are appended after their
// inputs, so the record is acyclic and already in topological order;
// backward walks it once in reverse.
class Tape {
 public:
  // A non-recording tape keeps forward values only (inference).
  explicit Tape(bool record_backward = true) : record_(record_backward) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, std::string name = {});
  Var constant(Tensor value);
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward);

  const Tensor& value(Var v) const;
  bool needs_grad(Var v) const;
  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  // Gradient accumulator for `v`; valid only inside a BackwardFn.
  Tensor& grad_of(Var v);

  Gradients backward(Var loss);

 private:
  struct Node {
    Tensor value;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_leaf = false;
    std::string name;
  };
  void check_owned(Var v) const;

  bool record_;
  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  bool in_backward_ = false;
};

}  // namespace vadasr
