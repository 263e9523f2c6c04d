"""Development aid: measure method AUCs on the reduced 32x32 task.

Runs the train/validate/test protocol for every method at a couple of
subset sizes and prints test AUCs and wall times, to choose default grids
for the shipped configs.  Not part of the test suite.
"""

import time

import numpy as np

import chokit as ck
from chokit.datasets import combine

SIDE = 32
SEED = 20260809

lumpy = ck.LumpyParams(5, 1.0, 7.0, (SIDE, SIDE))
signal = ck.SignalParams(0.2, (SIDE // 2, SIDE // 2), 5.0, 1.5)
coll = ck.CollimatorParams(40.0, 0.5)
noise = ck.NoiseParams(20.0)

t0 = time.time()
train = ck.generate_dataset(5000, lumpy, signal, coll, noise, seed=SEED, side=SIDE, split="train")
val = ck.generate_dataset(1000, lumpy, signal, coll, noise, seed=SEED, side=SIDE, split="validation")
test = ck.generate_dataset(2000, lumpy, signal, coll, noise, seed=SEED, side=SIDE, split="test")
print(f"generation: {time.time()-t0:.1f}s")


def test_auc(channels, calib):
    cho = ck.build_cho(channels, calib)
    s = ck.score(cho, test.images)
    return ck.empirical_auc(s[test.labels == 1], s[test.labels == 0])


def val_auc(channels, subset):
    cho = ck.build_cho(channels, subset)
    s = ck.score(cho, val.images)
    return ck.empirical_auc(s[val.labels == 1], s[val.labels == 0])


for pairs in (250, 5000):
    sub = train.take_pairs(np.arange(pairs))
    calib = combine(sub, val)
    delta = ck.estimate_signal(sub)
    print(f"=== subset {pairs} pairs ===")

    t0 = time.time()
    print(f"matched_filter: test={test_auc(ck.matched_filter(delta), calib):.4f} ({time.time()-t0:.1f}s)")

    t0 = time.time()
    best = None
    for width in (10, 15, 20, 25, 30):
        full = ck.lg_channels(20, width, SIDE)
        for m in (5, 10, 15, 20):
            a = val_auc(full.head(m), sub)
            if best is None or a > best[0]:
                best = (a, width, m)
    a, width, m = best
    print(f"lg: best width={width} m={m} val={a:.4f} test={test_auc(ck.lg_channels(m, width, SIDE), calib):.4f} ({time.time()-t0:.1f}s)")

    t0 = time.time()
    best = None
    for width in (10, 15, 20, 25, 30):
        full = ck.conv_lg_channels(ck.lg_channels(20, width, SIDE), delta)
        for m in (5, 10, 15, 20):
            a = val_auc(full.head(m), sub)
            if best is None or a > best[0]:
                best = (a, width, m, full.head(m))
    a, width, m, cm = best
    print(f"conv_lg: best width={width} m={m} val={a:.4f} test={test_auc(cm, calib):.4f} ({time.time()-t0:.1f}s)")

    t0 = time.time()
    full = ck.pls_channels(sub, 20)
    best = None
    for m in (5, 10, 15, 20):
        a = val_auc(full.head(m), sub)
        if best is None or a > best[0]:
            best = (a, m)
    a, m = best
    print(f"pls: best m={m} val={a:.4f} test={test_auc(full.head(m), calib):.4f} ({time.time()-t0:.1f}s)")

    for lr in (1e-5, 1e-4, 1e-3, 1e-2):
        for m in (10, 20):
            t0 = time.time()
            hp = ck.AeHyperparams(m=m, learning_rate=lr, epochs=500, minibatch_size=250, seed=11)
            cm = ck.train_ae_channels(sub, delta, hp)
            print(f"ae_task lr={lr:g} m={m}: val={val_auc(cm, sub):.4f} test={test_auc(cm, calib):.4f} ({time.time()-t0:.1f}s)")

    for lr in (1e-4, 1e-3):
        t0 = time.time()
        hp = ck.AeHyperparams(m=20, learning_rate=lr, epochs=500, minibatch_size=250, seed=11, loss_kind="traditional")
        cm = ck.train_ae_channels(sub, None, hp)
        print(f"ae_trad lr={lr:g} m=20: val={val_auc(cm, sub):.4f} test={test_auc(cm, calib):.4f} ({time.time()-t0:.1f}s)")

    t0 = time.time()
    hod = ck.build_ho_direct(calib)
    s = ck.score(hod, test.images)
    print(f"ho_direct: test={ck.empirical_auc(s[test.labels==1], s[test.labels==0]):.4f} deg={hod.degenerate} ({time.time()-t0:.1f}s)")

t0 = time.time()
bgs_train = ck.noiseless_backgrounds(10000, lumpy, coll, seed=SEED, side=SIDE, split="train")
bgs_val = ck.noiseless_backgrounds(2000, lumpy, coll, seed=SEED, side=SIDE, split="validation")
bgs = np.concatenate([bgs_train, bgs_val])
delta_tv = ck.estimate_signal(combine(train, val))
hoc = ck.build_ho_cmd(bgs, delta_tv, noise)
s = ck.score(hoc, test.images)
print(f"ho_cmd (12000 bgs): test={ck.empirical_auc(s[test.labels==1], s[test.labels==0]):.4f} ({time.time()-t0:.1f}s)")
