#include "vadasr/tape.hpp"

#include "vadasr/error.hpp"

namespace vadasr {

const Tensor& Var::value() const {
  if (!tape_) throw UsageError("value() on an unbound Var");
  return tape_->value(*this);
}

const Tensor& Gradients::operator[](Var leaf) const {
  auto it = by_id_.find(leaf.id());
  if (it == by_id_.end()) throw UsageError("no gradient recorded for this leaf");
  return it->second;
}

const Tensor& Gradients::operator[](const std::string& name) const {
  auto it = named_.find(name);
  if (it == named_.end()) throw UsageError("no gradient for leaf '" + name + "'");
  return it->second;
}

void Tape::check_owned(Var v) const {
  if (v.tape() != this || v.id() >= nodes_.size())
    throw UsageError("Var does not belong to this tape");
}

Var Tape::leaf(Tensor value, std::string name) {
  nodes_.push_back(Node{std::move(value), {}, record_, true, std::move(name)});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
  bool any_grad = false;
  for (Var in : inputs) {
    check_owned(in);
    any_grad = any_grad || nodes_[in.id()].requires_grad;
  }
  Node node{std::move(value), {}, any_grad && record_, false, {}};
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(Var v) const {
  check_owned(v);
  return nodes_[v.id()].value;
}

bool Tape::needs_grad(Var v) const {
  check_owned(v);
  return nodes_[v.id()].requires_grad;
}

Tensor& Tape::grad_of(Var v) {
  if (!in_backward_) throw UsageError("grad_of() outside backward()");
  check_owned(v);
  Tensor& g = grads_[v.id()];
  if (g.shape() != nodes_[v.id()].value.shape() || g.size() == 0)
    g = Tensor(nodes_[v.id()].value.shape(), 0.0);
  return g;
}

Gradients Tape::backward(Var loss) {
  if (loss.tape() != this || loss.id() >= nodes_.size())
    throw UsageError("backward(): loss was not produced on this tape");
  if (!record_) throw UsageError("backward() on a non-recording tape");
  const Tensor& lv = nodes_[loss.id()].value;
  if (lv.size() != 1)
    throw UsageError("backward(): loss must be a scalar, got shape " +
                     shape_string(lv.shape()));

  grads_.assign(nodes_.size(), Tensor());
  in_backward_ = true;
  grads_[loss.id()] = Tensor(lv.shape(), 1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || !node.backward || grads_[i].size() == 0) continue;
    const Tensor out_grad = std::move(grads_[i]);
    node.backward(*this, out_grad);
    grads_[i] = out_grad;
  }
  in_backward_ = false;

  Gradients result;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].is_leaf) continue;
    Tensor g = grads_[i].size() ? std::move(grads_[i])
                                : Tensor(nodes_[i].value.shape(), 0.0);
    if (!nodes_[i].name.empty()) result.named_[nodes_[i].name] = g;
    result.by_id_[i] = std::move(g);
  }
  grads_.clear();
  return result;
}

}  // namespace vadasr
