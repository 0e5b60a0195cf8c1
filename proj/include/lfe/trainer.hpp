#pragma once

#include <iostream>
#include <limits>

#include "lfe/model.hpp"

// Training loop over (low, high) pairs: cyclic batching, cosine-annealed
// Adam, periodic full-dataset evaluation, best checkpoint tracked by
// validation Charbonnier loss.

namespace lfe {

template <typename T>
struct PairSet {
    std::vector<std::string> names;
    std::vector<Tensor<T>> low, high;

    size_t size() const { return low.size(); }
};

template <typename T>
struct TrainLogRow {
    long long step;
    T lr;
    LossValues<T> loss;
};

template <typename T>
struct TrainOutcome {
    std::vector<TrainLogRow<T>> log;
    std::vector<std::pair<long long, LossValues<T>>> evals;  // (step, dataset mean)
    LossValues<T> initial_eval, final_eval;
    long long best_step = 0;
    T best_val_lc = std::numeric_limits<T>::infinity();
    ParamStore<T> best_params;
};

// Mean losses over the full pair set, plain path.
template <typename T>
LossValues<T> evaluate_pairs(const ParamStore<T>& ps, const PairSet<T>& data,
                             const ModelConfig& cfg) {
    if (data.size() == 0) throw InputError("evaluate_pairs: empty dataset");
    PlainEngine<T> eng;
    auto w = bind_model(eng, ps, cfg);
    LossValues<T> mean;
    const T inv = T(1) / static_cast<T>(data.size());
    for (size_t i = 0; i < data.size(); ++i) {
        auto outs = model_forward(eng, data.low[i], w, cfg);
        auto l = compute_losses(eng, outs, data.high[i], cfg);
        mean.total += l.total[0] * inv;
        mean.lc += l.lc[0] * inv;
        mean.lw += l.lw[0] * inv;
        mean.lf += l.lf[0] * inv;
    }
    return mean;
}

template <typename T>
TrainOutcome<T> train_loop(ParamStore<T>& ps, const PairSet<T>& data, const ModelConfig& cfg,
                           const TrainSettings& ts, std::ostream* log = nullptr) {
    if (data.size() == 0) throw InputError("train_loop: no training pairs");
    if (ts.crop % 8 != 0) throw InputError("train_loop: crop size must be divisible by 8");
    Rng crop_rng(ts.seed ^ 0x5bd1e995u);

    TrainOutcome<T> out;
    out.initial_eval = evaluate_pairs(ps, data, cfg);
    out.evals.emplace_back(0, out.initial_eval);
    out.best_val_lc = out.initial_eval.lc;
    out.best_params = ps;
    if (log)
        *log << "eval step 0 total " << out.initial_eval.total << " lc " << out.initial_eval.lc
             << " lw " << out.initial_eval.lw << " lf " << out.initial_eval.lf << "\n";

    AdamState<T> adam;
    size_t cursor = 0;
    for (long long step = 0; step < ts.steps; ++step) {
        std::vector<std::pair<Tensor<T>, Tensor<T>>> batch;
        for (int b = 0; b < ts.batch_size; ++b) {
            size_t i = cursor++ % data.size();
            const Tensor<T>& low = data.low[i];
            const Tensor<T>& high = data.high[i];
            if (low.dim(0) < ts.crop || low.dim(1) < ts.crop)
                throw InputError("train_loop: image " + data.names[i] + " smaller than crop size");
            if (low.dim(0) == ts.crop && low.dim(1) == ts.crop) {
                batch.emplace_back(low, high);
            } else {
                int y0 = crop_rng.uniform_int(0, low.dim(0) - ts.crop);
                int x0 = crop_rng.uniform_int(0, low.dim(1) - ts.crop);
                batch.emplace_back(crop_window(low, y0, x0, ts.crop, ts.crop),
                                   crop_window(high, y0, x0, ts.crop, ts.crop));
            }
        }
        T lr = cosine_lr(static_cast<T>(ts.lr), static_cast<T>(ts.lr_min), step, ts.steps);
        LossValues<T> rec = train_step(ps, batch, adam, cfg, lr);
        out.log.push_back({step, lr, rec});
        if (log)
            *log << "step " << step + 1 << " lr " << lr << " total " << rec.total << " lc " << rec.lc
                 << " lw " << rec.lw << " lf " << rec.lf << "\n";
        bool last = (step + 1 == ts.steps);
        if (last || (ts.eval_every > 0 && (step + 1) % ts.eval_every == 0)) {
            LossValues<T> ev = evaluate_pairs(ps, data, cfg);
            out.evals.emplace_back(step + 1, ev);
            if (log)
                *log << "eval step " << step + 1 << " total " << ev.total << " lc " << ev.lc << " lw "
                     << ev.lw << " lf " << ev.lf << "\n";
            if (ev.lc < out.best_val_lc) {
                out.best_val_lc = ev.lc;
                out.best_step = step + 1;
                out.best_params = ps;
            }
            if (last) out.final_eval = ev;
        }
    }
    return out;
}

}  // namespace lfe
