#include "coarse/nn/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

#include "coarse/error.hpp"

namespace coarse::nn {

namespace {
std::atomic<uint64_t> g_next_id{1};

Var make_node(Tensor value, std::vector<Var> parents,
              std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->parents = std::move(parents);
  node->id = g_next_id.fetch_add(1);
  for (const Var& p : node->parents) {
    if (p->requires_grad) {
      node->requires_grad = true;
      break;
    }
  }
  if (node->requires_grad) node->backward_fn = std::move(backward_fn);
  return node;
}
}  // namespace

Tensor& Node::ensure_grad() {
  if (grad.data.empty()) grad = Tensor::zeros(value.shape);
  return grad;
}

Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->id = g_next_id.fetch_add(1);
  return node;
}

Var param(Tensor value) {
  Var node = constant(std::move(value));
  node->requires_grad = true;
  return node;
}

void backward(const Var& root) {
  require(root != nullptr && root->value.numel() == 1,
          "backward: root must be a scalar");
  if (!root->requires_grad) return;
  root->ensure_grad().data[0] += 1.0;

  // Collect the reachable subgraph; creation ids give a topological order.
  std::vector<Node*> nodes;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.get()};
  seen.insert(root.get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    nodes.push_back(n);
    for (const Var& p : n->parents)
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
  }
  std::sort(nodes.begin(), nodes.end(),
            [](Node* a, Node* b) { return a->id > b->id; });
  for (Node* n : nodes)
    if (n->backward_fn && !n->grad.data.empty()) n->backward_fn(*n);
}

void zero_grad(const std::vector<Var>& params) {
  for (const Var& p : params) {
    if (!p->grad.data.empty())
      std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
  }
}

// ---------------------------------------------------------------------------
// elementwise

Var add(const Var& a, const Var& b) {
  require(a->value.same_shape(b->value), "add: shape mismatch");
  Tensor out = a->value;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b->value.data[i];
  return make_node(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) {
      Tensor& ga = a->ensure_grad();
      for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += n.grad.data[i];
    }
    if (b->requires_grad) {
      Tensor& gb = b->ensure_grad();
      for (size_t i = 0; i < gb.data.size(); ++i) gb.data[i] += n.grad.data[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require(a->value.same_shape(b->value), "sub: shape mismatch");
  Tensor out = a->value;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b->value.data[i];
  return make_node(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) {
      Tensor& ga = a->ensure_grad();
      for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += n.grad.data[i];
    }
    if (b->requires_grad) {
      Tensor& gb = b->ensure_grad();
      for (size_t i = 0; i < gb.data.size(); ++i) gb.data[i] -= n.grad.data[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require(a->value.same_shape(b->value), "mul: shape mismatch");
  Tensor out = a->value;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b->value.data[i];
  return make_node(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) {
      Tensor& ga = a->ensure_grad();
      for (size_t i = 0; i < ga.data.size(); ++i)
        ga.data[i] += n.grad.data[i] * b->value.data[i];
    }
    if (b->requires_grad) {
      Tensor& gb = b->ensure_grad();
      for (size_t i = 0; i < gb.data.size(); ++i)
        gb.data[i] += n.grad.data[i] * a->value.data[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a->value;
  for (double& v : out.data) v *= s;
  return make_node(std::move(out), {a}, [a, s](Node& n) {
    Tensor& ga = a->ensure_grad();
    for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += s * n.grad.data[i];
  });
}

Var gelu(const Var& x) {
  Tensor out = x->value;
  for (double& v : out.data) v = 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2));
  return make_node(std::move(out), {x}, [x](Node& n) {
    Tensor& gx = x->ensure_grad();
    constexpr double kInvSqrt2Pi = 0.3989422804014327;
    for (size_t i = 0; i < gx.data.size(); ++i) {
      double v = x->value.data[i];
      double phi = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
      double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      gx.data[i] += n.grad.data[i] * (phi + v * pdf);
    }
  });
}

Var reshape(const Var& x, std::vector<int> shape) {
  require(shape_numel(shape) == x->value.numel(), "reshape: element count mismatch");
  Tensor out;
  out.shape = std::move(shape);
  out.data = x->value.data;
  return make_node(std::move(out), {x}, [x](Node& n) {
    Tensor& gx = x->ensure_grad();
    for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += n.grad.data[i];
  });
}

// ---------------------------------------------------------------------------
// 2D

namespace {
// C[m,n] += A[m,k] * B[k,n], row-major, ikj order for contiguous inner loops.
void gemm_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + size_t(i) * k;
    double* crow = c + size_t(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      double av = arow[kk];
      if (av == 0.0) continue;
      const double* brow = b + size_t(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m,n] += A[m,k] * B^T where Bt is [n,k] row-major.
void gemm_bt_acc(const double* a, const double* bt, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + size_t(i) * k;
    double* crow = c + size_t(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = bt + size_t(j) * k;
      double acc = 0.0;
      for (int kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
      crow[j] += acc;
    }
  }
}

// C[k,n] += A^T * B where A is [m,k], B is [m,n].
void gemm_at_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + size_t(i) * k;
    const double* brow = b + size_t(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      double av = arow[kk];
      if (av == 0.0) continue;
      double* crow = c + size_t(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}
}  // namespace

Var matmul(const Var& a, const Var& b) {
  require(a->value.ndim() == 2 && b->value.ndim() == 2 &&
              a->value.dim(1) == b->value.dim(0),
          "matmul: incompatible shapes");
  const int m = a->value.dim(0), k = a->value.dim(1), n = b->value.dim(1);
  Tensor out({m, n});
  gemm_acc(a->value.ptr(), b->value.ptr(), out.ptr(), m, k, n);
  return make_node(std::move(out), {a, b}, [a, b, m, k, n](Node& node) {
    if (a->requires_grad)
      gemm_bt_acc(node.grad.ptr(), b->value.ptr(), a->ensure_grad().ptr(), m, n, k);
    if (b->requires_grad)
      gemm_at_acc(a->value.ptr(), node.grad.ptr(), b->ensure_grad().ptr(), m, k, n);
  });
}

Var transpose(const Var& x) {
  require(x->value.ndim() == 2, "transpose: expects a 2D tensor");
  const int m = x->value.dim(0), n = x->value.dim(1);
  Tensor out({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at2(j, i) = x->value.at2(i, j);
  return make_node(std::move(out), {x}, [x, m, n](Node& node) {
    Tensor& gx = x->ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) gx.at2(i, j) += node.grad.at2(j, i);
  });
}

Var add_rowvec(const Var& x, const Var& b) {
  require(x->value.ndim() == 2 && b->value.ndim() == 1 &&
              x->value.dim(1) == b->value.dim(0),
          "add_rowvec: shape mismatch");
  const int n = x->value.dim(0), d = x->value.dim(1);
  Tensor out = x->value;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out.at2(i, j) += b->value.data[j];
  return make_node(std::move(out), {x, b}, [x, b, n, d](Node& node) {
    if (x->requires_grad) {
      Tensor& gx = x->ensure_grad();
      for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += node.grad.data[i];
    }
    if (b->requires_grad) {
      Tensor& gb = b->ensure_grad();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) gb.data[j] += node.grad.at2(i, j);
    }
  });
}

Var slice_rows(const Var& x, int r0, int r1) {
  require(x->value.ndim() == 2 && r0 >= 0 && r1 <= x->value.dim(0) && r0 < r1,
          "slice_rows: bad range");
  const int d = x->value.dim(1);
  Tensor out({r1 - r0, d});
  std::copy(x->value.data.begin() + size_t(r0) * d,
            x->value.data.begin() + size_t(r1) * d, out.data.begin());
  return make_node(std::move(out), {x}, [x, r0, d](Node& node) {
    Tensor& gx = x->ensure_grad();
    const int rows = node.value.dim(0);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < d; ++j) gx.at2(r0 + i, j) += node.grad.at2(i, j);
  });
}

Var slice_cols(const Var& x, int c0, int c1) {
  require(x->value.ndim() == 2 && c0 >= 0 && c1 <= x->value.dim(1) && c0 < c1,
          "slice_cols: bad range");
  const int n = x->value.dim(0);
  Tensor out({n, c1 - c0});
  for (int i = 0; i < n; ++i)
    for (int j = c0; j < c1; ++j) out.at2(i, j - c0) = x->value.at2(i, j);
  return make_node(std::move(out), {x}, [x, c0](Node& node) {
    Tensor& gx = x->ensure_grad();
    const int n = node.value.dim(0), w = node.value.dim(1);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < w; ++j) gx.at2(i, c0 + j) += node.grad.at2(i, j);
  });
}

Var concat_rows(const std::vector<Var>& xs) {
  require(!xs.empty(), "concat_rows: empty input");
  const int d = xs[0]->value.dim(1);
  int rows = 0;
  for (const Var& x : xs) {
    require(x->value.ndim() == 2 && x->value.dim(1) == d,
            "concat_rows: column mismatch");
    rows += x->value.dim(0);
  }
  Tensor out({rows, d});
  size_t off = 0;
  for (const Var& x : xs) {
    std::copy(x->value.data.begin(), x->value.data.end(), out.data.begin() + off);
    off += x->value.data.size();
  }
  return make_node(std::move(out), xs, [xs](Node& node) {
    size_t off = 0;
    for (const Var& x : xs) {
      if (x->requires_grad) {
        Tensor& gx = x->ensure_grad();
        for (size_t i = 0; i < gx.data.size(); ++i)
          gx.data[i] += node.grad.data[off + i];
      }
      off += x->value.data.size();
    }
  });
}

Var concat_cols(const std::vector<Var>& xs) {
  require(!xs.empty(), "concat_cols: empty input");
  const int n = xs[0]->value.dim(0);
  int cols = 0;
  for (const Var& x : xs) {
    require(x->value.ndim() == 2 && x->value.dim(0) == n, "concat_cols: row mismatch");
    cols += x->value.dim(1);
  }
  Tensor out({n, cols});
  int c0 = 0;
  for (const Var& x : xs) {
    const int w = x->value.dim(1);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < w; ++j) out.at2(i, c0 + j) = x->value.at2(i, j);
    c0 += w;
  }
  return make_node(std::move(out), xs, [xs, n](Node& node) {
    int c0 = 0;
    for (const Var& x : xs) {
      const int w = x->value.dim(1);
      if (x->requires_grad) {
        Tensor& gx = x->ensure_grad();
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < w; ++j) gx.at2(i, j) += node.grad.at2(i, c0 + j);
      }
      c0 += w;
    }
  });
}

Var softmax_rows(const Var& x) {
  require(x->value.ndim() == 2, "softmax_rows: expects a 2D tensor");
  const int n = x->value.dim(0), d = x->value.dim(1);
  Tensor out({n, d});
  for (int i = 0; i < n; ++i) {
    double mx = -1e300;
    for (int j = 0; j < d; ++j) mx = std::max(mx, x->value.at2(i, j));
    double sum = 0.0;
    for (int j = 0; j < d; ++j) {
      double e = std::exp(x->value.at2(i, j) - mx);
      out.at2(i, j) = e;
      sum += e;
    }
    for (int j = 0; j < d; ++j) out.at2(i, j) /= sum;
  }
  return make_node(std::move(out), {x}, [x, n, d](Node& node) {
    Tensor& gx = x->ensure_grad();
    for (int i = 0; i < n; ++i) {
      double dot = 0.0;
      for (int j = 0; j < d; ++j) dot += node.grad.at2(i, j) * node.value.at2(i, j);
      for (int j = 0; j < d; ++j)
        gx.at2(i, j) += node.value.at2(i, j) * (node.grad.at2(i, j) - dot);
    }
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  require(x->value.ndim() == 2 && gamma->value.ndim() == 1 &&
              gamma->value.dim(0) == x->value.dim(1) &&
              beta->value.same_shape(gamma->value),
          "layer_norm: shape mismatch");
  const int n = x->value.dim(0), d = x->value.dim(1);
  Tensor out({n, d});
  Tensor xhat({n, d});
  Tensor inv_std({n});
  for (int i = 0; i < n; ++i) {
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += x->value.at2(i, j);
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      double c = x->value.at2(i, j) - mean;
      var += c * c;
    }
    var /= d;
    double istd = 1.0 / std::sqrt(var + eps);
    inv_std.data[i] = istd;
    for (int j = 0; j < d; ++j) {
      double h = (x->value.at2(i, j) - mean) * istd;
      xhat.at2(i, j) = h;
      out.at2(i, j) = h * gamma->value.data[j] + beta->value.data[j];
    }
  }
  return make_node(std::move(out), {x, gamma, beta},
                   [x, gamma, beta, xhat, inv_std, n, d](Node& node) {
    for (int i = 0; i < n; ++i) {
      double sum_dh = 0.0, sum_dh_xhat = 0.0;
      for (int j = 0; j < d; ++j) {
        double dh = node.grad.at2(i, j) * gamma->value.data[j];
        sum_dh += dh;
        sum_dh_xhat += dh * xhat.at2(i, j);
      }
      if (x->requires_grad) {
        Tensor& gx = x->ensure_grad();
        for (int j = 0; j < d; ++j) {
          double dh = node.grad.at2(i, j) * gamma->value.data[j];
          gx.at2(i, j) += inv_std.data[i] *
                          (dh - sum_dh / d - xhat.at2(i, j) * sum_dh_xhat / d);
        }
      }
      if (gamma->requires_grad) {
        Tensor& gg = gamma->ensure_grad();
        for (int j = 0; j < d; ++j)
          gg.data[j] += node.grad.at2(i, j) * xhat.at2(i, j);
      }
      if (beta->requires_grad) {
        Tensor& gb = beta->ensure_grad();
        for (int j = 0; j < d; ++j) gb.data[j] += node.grad.at2(i, j);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// CHW

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  require(x->value.ndim() == 3 && w->value.ndim() == 4,
          "conv2d: expects CHW input and OIHW weights");
  const int ci = x->value.dim(0), h = x->value.dim(1), wd = x->value.dim(2);
  const int co = w->value.dim(0), kh = w->value.dim(2), kw = w->value.dim(3);
  require(w->value.dim(1) == ci, "conv2d: channel mismatch");
  require(b->value.ndim() == 1 && b->value.dim(0) == co, "conv2d: bias mismatch");
  require(stride >= 1, "conv2d: bad stride");
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (wd + 2 * pad - kw) / stride + 1;
  require(oh > 0 && ow > 0, "conv2d: output would be empty");

  Tensor out({co, oh, ow});
  for (int o = 0; o < co; ++o) {
    double bias = b->value.data[o];
    double* oplane = out.ptr() + size_t(o) * oh * ow;
    for (int i = 0; i < oh * ow; ++i) oplane[i] = bias;
    for (int c = 0; c < ci; ++c) {
      const double* xplane = x->value.ptr() + size_t(c) * h * wd;
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          double wv = w->value.data[((size_t(o) * ci + c) * kh + ky) * kw + kx];
          if (wv == 0.0) continue;
          for (int oy = 0; oy < oh; ++oy) {
            int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            const double* xrow = xplane + size_t(iy) * wd;
            double* orow = oplane + size_t(oy) * ow;
            int ox0 = 0, ox1 = ow;
            // restrict to in-bounds ix = ox*stride - pad + kx
            while (ox0 < ow && ox0 * stride - pad + kx < 0) ++ox0;
            while (ox1 > ox0 && (ox1 - 1) * stride - pad + kx >= wd) --ox1;
            const double* xp = xrow + (size_t(ox0) * stride) + kx - pad;
            if (stride == 1) {
              for (int ox = ox0; ox < ox1; ++ox) orow[ox] += wv * xp[ox - ox0];
            } else {
              for (int ox = ox0; ox < ox1; ++ox)
                orow[ox] += wv * xrow[ox * stride - pad + kx];
            }
          }
        }
      }
    }
  }

  return make_node(std::move(out), {x, w, b},
                   [x, w, b, ci, h, wd, co, kh, kw, stride, pad](Node& node) {
    const int oh = node.value.dim(1), ow = node.value.dim(2);
    if (b->requires_grad) {
      Tensor& gb = b->ensure_grad();
      for (int o = 0; o < co; ++o) {
        const double* gplane = node.grad.ptr() + size_t(o) * oh * ow;
        double acc = 0.0;
        for (int i = 0; i < oh * ow; ++i) acc += gplane[i];
        gb.data[o] += acc;
      }
    }
    if (w->requires_grad) {
      Tensor& gw = w->ensure_grad();
      for (int o = 0; o < co; ++o) {
        const double* gplane = node.grad.ptr() + size_t(o) * oh * ow;
        for (int c = 0; c < ci; ++c) {
          const double* xplane = x->value.ptr() + size_t(c) * h * wd;
          for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
              double acc = 0.0;
              for (int oy = 0; oy < oh; ++oy) {
                int iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= h) continue;
                const double* xrow = xplane + size_t(iy) * wd;
                const double* grow = gplane + size_t(oy) * ow;
                for (int ox = 0; ox < ow; ++ox) {
                  int ix = ox * stride - pad + kx;
                  if (ix < 0 || ix >= wd) continue;
                  acc += xrow[ix] * grow[ox];
                }
              }
              gw.data[((size_t(o) * ci + c) * kh + ky) * kw + kx] += acc;
            }
          }
        }
      }
    }
    if (x->requires_grad) {
      Tensor& gx = x->ensure_grad();
      for (int o = 0; o < co; ++o) {
        const double* gplane = node.grad.ptr() + size_t(o) * oh * ow;
        for (int c = 0; c < ci; ++c) {
          double* gxplane = gx.ptr() + size_t(c) * h * wd;
          for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
              double wv = w->value.data[((size_t(o) * ci + c) * kh + ky) * kw + kx];
              if (wv == 0.0) continue;
              for (int oy = 0; oy < oh; ++oy) {
                int iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= h) continue;
                double* gxrow = gxplane + size_t(iy) * wd;
                const double* grow = gplane + size_t(oy) * ow;
                for (int ox = 0; ox < ow; ++ox) {
                  int ix = ox * stride - pad + kx;
                  if (ix < 0 || ix >= wd) continue;
                  gxrow[ix] += wv * grow[ox];
                }
              }
            }
          }
        }
      }
    }
  });
}

Var group_norm(const Var& x, const Var& gamma, const Var& beta, int groups,
               double eps) {
  require(x->value.ndim() == 3, "group_norm: expects CHW input");
  const int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  require(groups >= 1 && c % groups == 0, "group_norm: channels (", c,
          ") not divisible by groups (", groups, ")");
  require(gamma->value.ndim() == 1 && gamma->value.dim(0) == c &&
              beta->value.same_shape(gamma->value),
          "group_norm: affine parameter mismatch");
  const int cs = c / groups;
  const int64_t plane = int64_t(h) * w;
  const int64_t gsize = cs * plane;

  Tensor out({c, h, w});
  Tensor xhat({c, h, w});
  Tensor inv_std({groups});
  for (int g = 0; g < groups; ++g) {
    const double* xg = x->value.ptr() + size_t(g) * gsize;
    double mean = 0.0;
    for (int64_t i = 0; i < gsize; ++i) mean += xg[i];
    mean /= double(gsize);
    double var = 0.0;
    for (int64_t i = 0; i < gsize; ++i) {
      double d = xg[i] - mean;
      var += d * d;
    }
    var /= double(gsize);
    double istd = 1.0 / std::sqrt(var + eps);
    inv_std.data[g] = istd;
    double* hg = xhat.ptr() + size_t(g) * gsize;
    double* og = out.ptr() + size_t(g) * gsize;
    for (int cc = 0; cc < cs; ++cc) {
      double gamma_v = gamma->value.data[g * cs + cc];
      double beta_v = beta->value.data[g * cs + cc];
      for (int64_t i = 0; i < plane; ++i) {
        double hv = (xg[cc * plane + i] - mean) * istd;
        hg[cc * plane + i] = hv;
        og[cc * plane + i] = hv * gamma_v + beta_v;
      }
    }
  }

  return make_node(std::move(out), {x, gamma, beta},
                   [x, gamma, beta, xhat, inv_std, groups, cs, plane, gsize](Node& node) {
    for (int g = 0; g < groups; ++g) {
      const double* hg = xhat.ptr() + size_t(g) * gsize;
      const double* dg = node.grad.ptr() + size_t(g) * gsize;
      double sum_dh = 0.0, sum_dh_xhat = 0.0;
      for (int cc = 0; cc < cs; ++cc) {
        double gamma_v = gamma->value.data[g * cs + cc];
        for (int64_t i = 0; i < plane; ++i) {
          double dh = dg[cc * plane + i] * gamma_v;
          sum_dh += dh;
          sum_dh_xhat += dh * hg[cc * plane + i];
        }
      }
      if (gamma->requires_grad || beta->requires_grad) {
        for (int cc = 0; cc < cs; ++cc) {
          double acc_g = 0.0, acc_b = 0.0;
          for (int64_t i = 0; i < plane; ++i) {
            acc_g += dg[cc * plane + i] * hg[cc * plane + i];
            acc_b += dg[cc * plane + i];
          }
          if (gamma->requires_grad) gamma->ensure_grad().data[g * cs + cc] += acc_g;
          if (beta->requires_grad) beta->ensure_grad().data[g * cs + cc] += acc_b;
        }
      }
      if (x->requires_grad) {
        Tensor& gx = x->ensure_grad();
        double* gxg = gx.ptr() + size_t(g) * gsize;
        double istd = inv_std.data[g];
        double inv_n = 1.0 / double(gsize);
        for (int cc = 0; cc < cs; ++cc) {
          double gamma_v = gamma->value.data[g * cs + cc];
          for (int64_t i = 0; i < plane; ++i) {
            double dh = dg[cc * plane + i] * gamma_v;
            gxg[cc * plane + i] +=
                istd * (dh - sum_dh * inv_n - hg[cc * plane + i] * sum_dh_xhat * inv_n);
          }
        }
      }
    }
  });
}

namespace {
struct LerpWeights {
  int i0, i1;
  double w0, w1;
};

// Half-pixel-center sampling, clamped at borders.
std::vector<LerpWeights> lerp_axis(int in, int out) {
  std::vector<LerpWeights> ws(out);
  for (int o = 0; o < out; ++o) {
    double s = (o + 0.5) * double(in) / double(out) - 0.5;
    int i0 = int(std::floor(s));
    double f = s - i0;
    int i1 = i0 + 1;
    ws[o].i0 = std::clamp(i0, 0, in - 1);
    ws[o].i1 = std::clamp(i1, 0, in - 1);
    ws[o].w0 = 1.0 - f;
    ws[o].w1 = f;
  }
  return ws;
}
}  // namespace

Tensor bilinear_resize_value(const Tensor& x, int out_h, int out_w) {
  require(x.ndim() == 3, "bilinear_resize: expects CHW input");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  require(out_h > 0 && out_w > 0, "bilinear_resize: empty output");
  if (out_h == h && out_w == w) return x;
  auto wy = lerp_axis(h, out_h);
  auto wx = lerp_axis(w, out_w);
  Tensor out({c, out_h, out_w});
  for (int cc = 0; cc < c; ++cc) {
    const double* xp = x.ptr() + size_t(cc) * h * w;
    double* op = out.ptr() + size_t(cc) * out_h * out_w;
    for (int oy = 0; oy < out_h; ++oy) {
      const double* r0 = xp + size_t(wy[oy].i0) * w;
      const double* r1 = xp + size_t(wy[oy].i1) * w;
      double* orow = op + size_t(oy) * out_w;
      for (int ox = 0; ox < out_w; ++ox) {
        const auto& ax = wx[ox];
        double top = r0[ax.i0] * ax.w0 + r0[ax.i1] * ax.w1;
        double bot = r1[ax.i0] * ax.w0 + r1[ax.i1] * ax.w1;
        orow[ox] = top * wy[oy].w0 + bot * wy[oy].w1;
      }
    }
  }
  return out;
}

Var bilinear_resize(const Var& x, int out_h, int out_w) {
  Tensor out = bilinear_resize_value(x->value, out_h, out_w);
  const int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  if (out_h == h && out_w == w) {
    // Still materialize a node so downstream graph structure is uniform.
    return make_node(std::move(out), {x}, [x](Node& node) {
      Tensor& gx = x->ensure_grad();
      for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += node.grad.data[i];
    });
  }
  return make_node(std::move(out), {x}, [x, c, h, w, out_h, out_w](Node& node) {
    auto wy = lerp_axis(h, out_h);
    auto wx = lerp_axis(w, out_w);
    Tensor& gx = x->ensure_grad();
    for (int cc = 0; cc < c; ++cc) {
      double* gp = gx.ptr() + size_t(cc) * h * w;
      const double* dp = node.grad.ptr() + size_t(cc) * out_h * out_w;
      for (int oy = 0; oy < out_h; ++oy) {
        const auto& ay = wy[oy];
        const double* drow = dp + size_t(oy) * out_w;
        for (int ox = 0; ox < out_w; ++ox) {
          const auto& ax = wx[ox];
          double g = drow[ox];
          gp[size_t(ay.i0) * w + ax.i0] += g * ay.w0 * ax.w0;
          gp[size_t(ay.i0) * w + ax.i1] += g * ay.w0 * ax.w1;
          gp[size_t(ay.i1) * w + ax.i0] += g * ay.w1 * ax.w0;
          gp[size_t(ay.i1) * w + ax.i1] += g * ay.w1 * ax.w1;
        }
      }
    }
  });
}

Var concat_channels(const std::vector<Var>& xs) {
  require(!xs.empty(), "concat_channels: empty input");
  const int h = xs[0]->value.dim(1), w = xs[0]->value.dim(2);
  int c = 0;
  for (const Var& x : xs) {
    require(x->value.ndim() == 3 && x->value.dim(1) == h && x->value.dim(2) == w,
            "concat_channels: spatial mismatch");
    c += x->value.dim(0);
  }
  Tensor out({c, h, w});
  size_t off = 0;
  for (const Var& x : xs) {
    std::copy(x->value.data.begin(), x->value.data.end(), out.data.begin() + off);
    off += x->value.data.size();
  }
  return make_node(std::move(out), xs, [xs](Node& node) {
    size_t off = 0;
    for (const Var& x : xs) {
      if (x->requires_grad) {
        Tensor& gx = x->ensure_grad();
        for (size_t i = 0; i < gx.data.size(); ++i)
          gx.data[i] += node.grad.data[off + i];
      }
      off += x->value.data.size();
    }
  });
}

Var weighted_ce_loss(const Var& logits, const std::vector<uint8_t>& target,
                     int target_h, int target_w, int ignore_value,
                     const std::vector<double>& class_weights) {
  require(logits->value.ndim() == 3, "weighted_ce_loss: logits must be CHW");
  const int c = logits->value.dim(0), h = logits->value.dim(1), w = logits->value.dim(2);
  require(h == target_h && w == target_w,
          "weighted_ce_loss: logits (", w, "x", h, ") vs target (", target_w, "x",
          target_h, ") shape mismatch");
  require(int(class_weights.size()) == c, "weighted_ce_loss: weight count mismatch");
  require(logits->value.all_finite(), "weighted_ce_loss: non-finite logits");

  const int64_t plane = int64_t(h) * w;
  // Per-pixel softmax probabilities, kept for the backward pass.
  auto probs = std::make_shared<Tensor>(std::vector<int>{c, h, w});
  double weight_sum = 0.0;
  double loss_sum = 0.0;
  for (int64_t i = 0; i < plane; ++i) {
    int t = target[size_t(i)];
    if (t == ignore_value) continue;
    require(t >= 0 && t < c, "weighted_ce_loss: target class ", t, " out of range");
    double mx = -1e300;
    for (int k = 0; k < c; ++k) mx = std::max(mx, logits->value.data[k * plane + i]);
    double sum = 0.0;
    for (int k = 0; k < c; ++k) {
      double e = std::exp(logits->value.data[k * plane + i] - mx);
      probs->data[k * plane + i] = e;
      sum += e;
    }
    for (int k = 0; k < c; ++k) probs->data[k * plane + i] /= sum;
    double wgt = class_weights[t];
    weight_sum += wgt;
    loss_sum += wgt * (std::log(sum) + mx - logits->value.data[size_t(t) * plane + i]);
  }

  double loss = weight_sum > 0.0 ? loss_sum / weight_sum : 0.0;
  Tensor out = Tensor::scalar(loss);
  if (weight_sum == 0.0) return constant(std::move(out));

  return make_node(std::move(out), {logits},
                   [logits, probs, target, ignore_value, class_weights, c,
                    plane, weight_sum](Node& node) {
    double g = node.grad.data[0] / weight_sum;
    Tensor& gl = logits->ensure_grad();
    for (int64_t i = 0; i < plane; ++i) {
      int t = target[size_t(i)];
      if (t == ignore_value) continue;
      double wg = class_weights[t] * g;
      for (int k = 0; k < c; ++k) {
        double p = probs->data[k * plane + i];
        gl.data[k * plane + i] += wg * (p - (k == t ? 1.0 : 0.0));
      }
    }
  });
}

}  // namespace coarse::nn
