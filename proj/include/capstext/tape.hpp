#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "capstext/matrix.hpp"

namespace capstext::numcore {

// Reverse-mode differentiation tape recording matrix-granularity primitives.
// Nodes are appended in evaluation order, so the node list is always
// topologically sorted. One forward/backward pair per tape instance;
// parallelism comes from independent tapes whose gradients are summed in a
// fixed order by the caller.
class Tape {
 public:
  struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
    bool valid() const { return id != static_cast<std::size_t>(-1); }
  };

  // Leaf holding an input or parameter value. Gradients of leaves are read
  // from adjoint() after backward().
  Var leaf(Matrix value);

  const Matrix& value(Var v) const;
  // Valid after backward(); zero matrix for nodes the loss does not reach.
  const Matrix& adjoint(Var v) const;

  std::size_t node_count() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var scale(Var a, double c);
  Var transpose(Var a);

  // Softmax applied independently to each row.
  Var row_softmax(Var a);
  Var sigmoid(Var a);
  Var relu(Var a);

  // log(clamp(x, lo, hi)) elementwise; gradient is zero on clamped entries.
  Var log_clamped(Var a, double lo, double hi);

  // Reduction to a 1x1 scalar.
  Var sum(Var a);

  // Row i of a as a 1xN matrix.
  Var row(Var a, std::size_t i);
  // Entry (i, j) of a as a 1x1 matrix.
  Var element(Var a, std::size_t i, std::size_t j);

  // x (n x d) plus bias (1 x d) added to every row.
  Var add_row_broadcast(Var x, Var bias);

  // Column-wise concatenation; all parts share the row count.
  Var concat_cols(std::span<const Var> parts);
  // Columns [first, first + count) of a.
  Var slice_cols(Var a, std::size_t first, std::size_t count);

  // Per-row layer normalization followed by elementwise scale and offset
  // (both 1 x d rows).
  Var layer_norm(Var x, Var scale_row, Var offset_row, double eps);

  // Row gather: output row t is table row ids[t]. Duplicated ids accumulate
  // gradient in position order.
  Var embedding(Var table, std::span<const std::size_t> ids);

  // Broadcast multiply of a 1x1 scalar node against a matrix node.
  Var scalar_mul(Var s, Var a);

  // Seeds the adjoint of the (scalar) loss node with 1 and sweeps the tape
  // in reverse. Throws ContractError if the loss node is not 1x1.
  void backward(Var loss);

 private:
  struct Node {
    Matrix value;
    Matrix adjoint;
    std::vector<std::size_t> parents;
    std::function<void(Tape&, std::size_t)> pull;
  };

  Var push(Matrix value, std::vector<std::size_t> parents,
           std::function<void(Tape&, std::size_t)> pull);
  Node& node(Var v);
  const Node& node(Var v) const;
  Matrix& adjoint_ref(std::size_t id) { return nodes_[id].adjoint; }

  std::vector<Node> nodes_;
};

}  // namespace capstext::numcore
