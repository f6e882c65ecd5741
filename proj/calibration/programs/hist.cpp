#include <chrono>
#include <cstdio>
#include <cstdlib>
#include "srcl/eval.hpp"
#include "srcl/trainer.hpp"
using namespace srcl;
int main() {
  auto env = [](const char* k, double d) { const char* v = getenv(k); return v ? atof(v) : d; };
  WorldSpec ws;
  ws.n_concepts = (size_t)env("NC", 4096); ws.dim_a = ws.dim_b = (size_t)env("DIM", 64);
  ws.latent_dim = (size_t)env("LAT", 64); ws.emb_noise = 0.0; ws.false_neg_rate = 0.0;
  TrainConfig tc; tc.steps = (size_t)env("STEPS", 1000); tc.batch = 64; tc.emb_dim = (size_t)env("EMB", 64);
  tc.regulator.similarity_scale = env("BETA", 1);
  for (int s = 1; s <= (int)env("SEEDS", 2); ++s) {
    auto t0 = std::chrono::steady_clock::now();
    ws.seed = s; tc.seed = s;
    auto teacher = train_teacher(ws, tc).teacher;
    auto st = train_student(ws, teacher, tc);
    auto h = weight_histogram(st, ws, (size_t)env("HB", 50));
    double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    printf("seed %d r1 %.3f frac %.4f fn %.3f tn %.3f nfn %lu (%.1fs)\n", s, validation_retrieval(st.student, ws, 512).mean_r1(), h.fraction_within(0.8, 1.2), h.mean_false_neg, h.mean_true_neg, (unsigned long)h.n_false_neg, dt);
  }
}
