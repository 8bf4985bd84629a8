#include "capstext/tape.hpp"

#include <cmath>
#include <utility>

#include "capstext/error.hpp"

namespace capstext::numcore {

Tape::Var Tape::push(Matrix value, std::vector<std::size_t> parents,
                     std::function<void(Tape&, std::size_t)> pull) {
  nodes_.push_back(Node{std::move(value), Matrix(), std::move(parents), std::move(pull)});
  return Var{nodes_.size() - 1};
}

Tape::Node& Tape::node(Var v) {
  if (!v.valid() || v.id >= nodes_.size()) throw ContractError("tape: invalid node handle");
  return nodes_[v.id];
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw ContractError("tape: invalid node handle");
  return nodes_[v.id];
}

Tape::Var Tape::leaf(Matrix value) {
  if (value.empty()) throw ShapeError("tape: empty leaf");
  return push(std::move(value), {}, nullptr);
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

const Matrix& Tape::adjoint(Var v) const {
  const Node& n = node(v);
  if (n.adjoint.empty()) throw ContractError("tape: adjoint read before backward");
  return n.adjoint;
}

Tape::Var Tape::matmul(Var a, Var b) {
  Matrix out = numcore::matmul(value(a), value(b));
  return push(std::move(out), {a.id, b.id}, [](Tape& t, std::size_t self) {
    const Matrix& dy = t.nodes_[self].adjoint;
    const std::size_t pa = t.nodes_[self].parents[0];
    const std::size_t pb = t.nodes_[self].parents[1];
    const Matrix& av = t.nodes_[pa].value;
    const Matrix& bv = t.nodes_[pb].value;
    // dA += dY * B^T
    {
      Matrix& da = t.adjoint_ref(pa);
      for (std::size_t i = 0; i < av.rows(); ++i) {
        for (std::size_t k = 0; k < av.cols(); ++k) {
          double acc = 0.0;
          for (std::size_t j = 0; j < bv.cols(); ++j) acc += dy(i, j) * bv(k, j);
          da(i, k) += acc;
        }
      }
    }
    // dB += A^T * dY
    {
      Matrix& db = t.adjoint_ref(pb);
      for (std::size_t k = 0; k < bv.rows(); ++k) {
        for (std::size_t i = 0; i < av.rows(); ++i) {
          const double aik = av(i, k);
          for (std::size_t j = 0; j < bv.cols(); ++j) db(k, j) += aik * dy(i, j);
        }
      }
    }
  });
}

Tape::Var Tape::add(Var a, Var b) {
  Matrix out = numcore::add(value(a), value(b));
  return push(std::move(out), {a.id, b.id}, [](Tape& t, std::size_t self) {
    const Matrix& dy = t.nodes_[self].adjoint;
    for (int side = 0; side < 2; ++side) {
      Matrix& dp = t.adjoint_ref(t.nodes_[self].parents[side]);
      for (std::size_t i = 0; i < dy.size(); ++i) dp.values()[i] += dy.values()[i];
    }
  });
}

Tape::Var Tape::sub(Var a, Var b) {
  Matrix out = numcore::sub(value(a), value(b));
  return push(std::move(out), {a.id, b.id}, [](Tape& t, std::size_t self) {
    const Matrix& dy = t.nodes_[self].adjoint;
    Matrix& da = t.adjoint_ref(t.nodes_[self].parents[0]);
    Matrix& db = t.adjoint_ref(t.nodes_[self].parents[1]);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      da.values()[i] += dy.values()[i];
      db.values()[i] -= dy.values()[i];
    }
  });
}

Tape::Var Tape::hadamard(Var a, Var b) {
  Matrix out = numcore::hadamard(value(a), value(b));
  return push(std::move(out), {a.id, b.id}, [](Tape& t, std::size_t self) {
    const Matrix& dy = t.nodes_[self].adjoint;
    const std::size_t pa = t.nodes_[self].parents[0];
    const std::size_t pb = t.nodes_[self].parents[1];
    const Matrix& av = t.nodes_[pa].value;
    const Matrix& bv = t.nodes_[pb].value;
    Matrix& da = t.adjoint_ref(pa);
    Matrix& db = t.adjoint_ref(pb);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      da.values()[i] += dy.values()[i] * bv.values()[i];
      db.values()[i] += dy.values()[i] * av.values()[i];
    }
  });
}

Tape::Var Tape::scale(Var a, double c) {
  Matrix out = numcore::scale(value(a), c);
  return push(std::move(out), {a.id}, [c](Tape& t, std::size_t self) {
    const Matrix& dy = t.nodes_[self].adjoint;
    Matrix& da = t.adjoint_ref(t.nodes_[self].parents[0]);
    for (std::size_t i = 0; i < dy.size(); ++i) da.values()[i] += c * dy.values()[i];
  });
}

Tape::Var Tape::transpose(Var a) {
  Matrix out = numcore::transpose(value(a));
  return push(std::move(out), {a.id}, [](Tape& t, std::size_t self) {
    const Matrix& dy = t.nodes_[self].adjoint;
    Matrix& da = t.adjoint_ref(t.nodes_[self].parents[0]);
    for (std::size_t i = 0; i < dy.rows(); ++i) {
      for (std::size_t j = 0; j < dy.cols(); ++j) da(j, i) += dy(i, j);
    }
  });
}

Tape::Var Tape::row_softmax(Var a) {
  Matrix out = value(a);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    softmax_inplace({out.row_ptr(i), out.cols()});
  }
  return push(std::move(out), {a.id}, [](Tape& t, std::size_t self) {
    const Matrix& dy = t.nodes_[self].adjoint;
    const Matrix& s = t.nodes_[self].value;
    Matrix& da = t.adjoint_ref(t.nodes_[self].parents[0]);
    for (std::size_t i = 0; i < s.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < s.cols(); ++j) dot += dy(i, j) * s(i, j);
      for (std::size_t j = 0; j < s.cols(); ++j) {
        da(i, j) += s(i, j) * (dy(i, j) - dot);
      }
    }
  });
}

Tape::Var Tape::sigmoid(Var a) {
  Matrix out = value(a);
  for (double& v : out.values()) v = numcore::sigmoid(v);
  return push(std::move(out), {a.id}, [](Tape& t, std::size_t self) {
    const Matrix& dy = t.nodes_[self].adjoint;
    const Matrix& y = t.nodes_[self].value;
    Matrix& da = t.adjoint_ref(t.nodes_[self].parents[0]);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      const double yi = y.values()[i];
      da.values()[i] += dy.values()[i] * yi * (1.0 - yi);
    }
  });
}

Tape::Var Tape::relu(Var a) {
  Matrix out = value(a);
  for (double& v : out.values()) {
    if (v < 0.0) v = 0.0;
  }
  return push(std::move(out), {a.id}, [](Tape& t, std::size_t self) {
    const Matrix& dy = t.nodes_[self].adjoint;
    const std::size_t pa = t.nodes_[self].parents[0];
    const Matrix& x = t.nodes_[pa].value;
    Matrix& da = t.adjoint_ref(pa);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      if (x.values()[i] > 0.0) da.values()[i] += dy.values()[i];
    }
  });
}

Tape::Var Tape::log_clamped(Var a, double lo, double hi) {
  if (!(lo > 0.0) || !(hi > lo)) throw InputError("log_clamped: invalid bounds");
  Matrix out = value(a);
  for (double& v : out.values()) {
    double c = v;
    if (c < lo) c = lo;
    if (c > hi) c = hi;
    v = std::log(c);
  }
  return push(std::move(out), {a.id}, [lo, hi](Tape& t, std::size_t self) {
    const Matrix& dy = t.nodes_[self].adjoint;
    const std::size_t pa = t.nodes_[self].parents[0];
    const Matrix& x = t.nodes_[pa].value;
    Matrix& da = t.adjoint_ref(pa);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      const double xi = x.values()[i];
      if (xi > lo && xi < hi) da.values()[i] += dy.values()[i] / xi;
    }
  });
}

Tape::Var Tape::sum(Var a) {
  Matrix out(1, 1, 0.0);
  out(0, 0) = sum_all(value(a));
  return push(std::move(out), {a.id}, [](Tape& t, std::size_t self) {
    const double dy = t.nodes_[self].adjoint(0, 0);
    Matrix& da = t.adjoint_ref(t.nodes_[self].parents[0]);
    for (double& v : da.values()) v += dy;
  });
}

Tape::Var Tape::row(Var a, std::size_t i) {
  const Matrix& av = value(a);
  if (i >= av.rows()) throw ShapeError("row: index out of range");
  Matrix out(1, av.cols(), 0.0);
  for (std::size_t j = 0; j < av.cols(); ++j) out(0, j) = av(i, j);
  return push(std::move(out), {a.id}, [i](Tape& t, std::size_t self) {
    const Matrix& dy = t.nodes_[self].adjoint;
    Matrix& da = t.adjoint_ref(t.nodes_[self].parents[0]);
    for (std::size_t j = 0; j < dy.cols(); ++j) da(i, j) += dy(0, j);
  });
}

Tape::Var Tape::element(Var a, std::size_t i, std::size_t j) {
  const Matrix& av = value(a);
  if (i >= av.rows() || j >= av.cols()) throw ShapeError("element: index out of range");
  Matrix out(1, 1, av(i, j));
  return push(std::move(out), {a.id}, [i, j](Tape& t, std::size_t self) {
    const double dy = t.nodes_[self].adjoint(0, 0);
    t.adjoint_ref(t.nodes_[self].parents[0])(i, j) += dy;
  });
}

Tape::Var Tape::add_row_broadcast(Var x, Var bias) {
  const Matrix& xv = value(x);
  const Matrix& bv = value(bias);
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw ShapeError("add_row_broadcast: bias " + bv.shape_string() +
                     " does not match " + xv.shape_string());
  }
  Matrix out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double* row = out.row_ptr(i);
    for (std::size_t j = 0; j < out.cols(); ++j) row[j] += bv(0, j);
  }
  require_finite(out, "add_row_broadcast");
  return push(std::move(out), {x.id, bias.id}, [](Tape& t, std::size_t self) {
    const Matrix& dy = t.nodes_[self].adjoint;
    Matrix& dx = t.adjoint_ref(t.nodes_[self].parents[0]);
    Matrix& db = t.adjoint_ref(t.nodes_[self].parents[1]);
    for (std::size_t i = 0; i < dy.size(); ++i) dx.values()[i] += dy.values()[i];
    for (std::size_t i = 0; i < dy.rows(); ++i) {
      for (std::size_t j = 0; j < dy.cols(); ++j) db(0, j) += dy(i, j);
    }
  });
}

Tape::Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  const std::size_t rows = value(parts[0]).rows();
  std::size_t cols = 0;
  std::vector<std::size_t> parents;
  std::vector<std::size_t> widths;
  parents.reserve(parts.size());
  widths.reserve(parts.size());
  for (Var p : parts) {
    const Matrix& pv = value(p);
    if (pv.rows() != rows) throw ShapeError("concat_cols: row count mismatch");
    parents.push_back(p.id);
    widths.push_back(pv.cols());
    cols += pv.cols();
  }
  Matrix out(rows, cols, 0.0);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Matrix& pv = value(p);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < pv.cols(); ++j) out(i, offset + j) = pv(i, j);
    }
    offset += pv.cols();
  }
  return push(std::move(out), std::move(parents),
              [widths](Tape& t, std::size_t self) {
                const Matrix& dy = t.nodes_[self].adjoint;
                std::size_t offset = 0;
                for (std::size_t p = 0; p < widths.size(); ++p) {
                  Matrix& dp = t.adjoint_ref(t.nodes_[self].parents[p]);
                  for (std::size_t i = 0; i < dy.rows(); ++i) {
                    for (std::size_t j = 0; j < widths[p]; ++j) {
                      dp(i, j) += dy(i, offset + j);
                    }
                  }
                  offset += widths[p];
                }
              });
}

Tape::Var Tape::slice_cols(Var a, std::size_t first, std::size_t count) {
  const Matrix& av = value(a);
  if (count == 0 || first + count > av.cols()) {
    throw ShapeError("slice_cols: range out of bounds");
  }
  Matrix out(av.rows(), count, 0.0);
  for (std::size_t i = 0; i < av.rows(); ++i) {
    for (std::size_t j = 0; j < count; ++j) out(i, j) = av(i, first + j);
  }
  return push(std::move(out), {a.id}, [first, count](Tape& t, std::size_t self) {
    const Matrix& dy = t.nodes_[self].adjoint;
    Matrix& da = t.adjoint_ref(t.nodes_[self].parents[0]);
    for (std::size_t i = 0; i < dy.rows(); ++i) {
      for (std::size_t j = 0; j < count; ++j) da(i, first + j) += dy(i, j);
    }
  });
}

Tape::Var Tape::layer_norm(Var x, Var scale_row, Var offset_row, double eps) {
  const Matrix& xv = value(x);
  const Matrix& g = value(scale_row);
  const Matrix& b = value(offset_row);
  const std::size_t d = xv.cols();
  if (g.rows() != 1 || g.cols() != d || b.rows() != 1 || b.cols() != d) {
    throw ShapeError("layer_norm: scale/offset must be 1x" + std::to_string(d));
  }
  Matrix out(xv.rows(), d, 0.0);
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xv(i, j);
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = xv(i, j) - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      out(i, j) = (xv(i, j) - mean) * inv * g(0, j) + b(0, j);
    }
  }
  require_finite(out, "layer_norm");
  return push(std::move(out), {x.id, scale_row.id, offset_row.id},
              [eps](Tape& t, std::size_t self) {
                const Matrix& dy = t.nodes_[self].adjoint;
                const std::size_t px = t.nodes_[self].parents[0];
                const std::size_t pg = t.nodes_[self].parents[1];
                const std::size_t pb = t.nodes_[self].parents[2];
                const Matrix& xv = t.nodes_[px].value;
                const Matrix& g = t.nodes_[pg].value;
                Matrix& dx = t.adjoint_ref(px);
                Matrix& dg = t.adjoint_ref(pg);
                Matrix& db = t.adjoint_ref(pb);
                const std::size_t d = xv.cols();
                const double dn = static_cast<double>(d);
                for (std::size_t i = 0; i < xv.rows(); ++i) {
                  double mean = 0.0;
                  for (std::size_t j = 0; j < d; ++j) mean += xv(i, j);
                  mean /= dn;
                  double var = 0.0;
                  for (std::size_t j = 0; j < d; ++j) {
                    const double c = xv(i, j) - mean;
                    var += c * c;
                  }
                  var /= dn;
                  const double inv = 1.0 / std::sqrt(var + eps);
                  // dxhat = dy * g; accumulate dg, db from this row.
                  double mean_dxhat = 0.0;
                  double mean_dxhat_xhat = 0.0;
                  for (std::size_t j = 0; j < d; ++j) {
                    const double xhat = (xv(i, j) - mean) * inv;
                    const double dxhat = dy(i, j) * g(0, j);
                    dg(0, j) += dy(i, j) * xhat;
                    db(0, j) += dy(i, j);
                    mean_dxhat += dxhat;
                    mean_dxhat_xhat += dxhat * xhat;
                  }
                  mean_dxhat /= dn;
                  mean_dxhat_xhat /= dn;
                  for (std::size_t j = 0; j < d; ++j) {
                    const double xhat = (xv(i, j) - mean) * inv;
                    const double dxhat = dy(i, j) * g(0, j);
                    dx(i, j) += inv * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
                  }
                }
              });
}

Tape::Var Tape::embedding(Var table, std::span<const std::size_t> ids) {
  const Matrix& tv = value(table);
  if (ids.empty()) throw ShapeError("embedding: empty id list");
  for (std::size_t id : ids) {
    if (id >= tv.rows()) throw InputError("embedding: id out of range");
  }
  Matrix out(ids.size(), tv.cols(), 0.0);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    for (std::size_t j = 0; j < tv.cols(); ++j) out(t, j) = tv(ids[t], j);
  }
  std::vector<std::size_t> ids_copy(ids.begin(), ids.end());
  return push(std::move(out), {table.id},
              [ids_copy](Tape& t, std::size_t self) {
                const Matrix& dy = t.nodes_[self].adjoint;
                Matrix& dt = t.adjoint_ref(t.nodes_[self].parents[0]);
                for (std::size_t r = 0; r < ids_copy.size(); ++r) {
                  for (std::size_t j = 0; j < dy.cols(); ++j) {
                    dt(ids_copy[r], j) += dy(r, j);
                  }
                }
              });
}

Tape::Var Tape::scalar_mul(Var s, Var a) {
  const Matrix& sv = value(s);
  if (sv.rows() != 1 || sv.cols() != 1) {
    throw ShapeError("scalar_mul: scalar operand must be 1x1, got " + sv.shape_string());
  }
  Matrix out = numcore::scale(value(a), sv(0, 0));
  return push(std::move(out), {s.id, a.id}, [](Tape& t, std::size_t self) {
    const Matrix& dy = t.nodes_[self].adjoint;
    const std::size_t ps = t.nodes_[self].parents[0];
    const std::size_t pa = t.nodes_[self].parents[1];
    const double s = t.nodes_[ps].value(0, 0);
    const Matrix& av = t.nodes_[pa].value;
    Matrix& ds = t.adjoint_ref(ps);
    Matrix& da = t.adjoint_ref(pa);
    double acc = 0.0;
    for (std::size_t i = 0; i < dy.size(); ++i) {
      acc += dy.values()[i] * av.values()[i];
      da.values()[i] += s * dy.values()[i];
    }
    ds(0, 0) += acc;
  });
}

void Tape::backward(Var loss) {
  const Node& loss_node = node(loss);
  if (loss_node.value.rows() != 1 || loss_node.value.cols() != 1) {
    throw ContractError("backward: loss node must be scalar, got " +
                        loss_node.value.shape_string());
  }
  for (Node& n : nodes_) {
    n.adjoint = Matrix(n.value.rows(), n.value.cols(), 0.0);
  }
  nodes_[loss.id].adjoint(0, 0) = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (nodes_[i].pull) nodes_[i].pull(*this, i);
  }
}

}  // namespace capstext::numcore
