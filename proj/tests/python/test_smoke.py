"""Smoke test of the Python bindings: round-trips and one tiny train loop."""

import json
import os
import tempfile

import pauselab


def test_vocab_roundtrip():
    spec = pauselab.TaskSpec()
    spec.n_train, spec.n_val, spec.n_test = 8, 2, 2
    spec.digits = 2
    data = pauselab.generate_task(spec)
    vocab = pauselab.Vocab.build(data.alphabet)
    text = data.train.records[0].target
    ids = vocab.encode(text)
    assert vocab.decode(ids) == text
    assert min(ids) >= 4  # plain text never maps to special ids
    return data, vocab


def test_inject():
    strategy = pauselab.StrategyConfig()
    strategy.kind = pauselab.StrategyKind.ran
    ex = pauselab.Example()
    ex.prefix_ids = [pauselab.BOS_ID, 5]
    ex.target_ids = [6, 7, 8, pauselab.EOS_ID]
    inj = pauselab.inject(ex, [1, 3], strategy, 64)
    assert inj.ids == [pauselab.BOS_ID, 5, 6, pauselab.PAUSE_ID, 7, 8, pauselab.PAUSE_ID, pauselab.EOS_ID]
    assert inj.loss_lo == 1 and inj.loss_hi == len(inj.ids) - 1
    assert pauselab.strip_pause(inj.ids) == ex.prefix_ids + ex.target_ids
    assert inj.ignore_set == [2, 5]


def test_train_and_checkpoint(data, vocab):
    train_set = pauselab.encode_dataset(data.train, vocab)
    mc = pauselab.ModelConfig()
    mc.num_layers, mc.num_heads, mc.d_model, mc.d_ff = 1, 2, 8, 16
    mc.vocab_size = vocab.size()
    mc.max_seq_len = 64
    tc = pauselab.TrainConfig()
    tc.epochs, tc.batch_size, tc.learning_rate = 2, 4, 0.1
    strategy = pauselab.StrategyConfig()
    strategy.kind = pauselab.StrategyKind.dit
    result = pauselab.train(train_set, None, strategy, tc, mc)
    assert result.log.backward_count == 4  # 8 examples, batch 4, 2 epochs
    assert result.log.forward_count == 8  # per-step site refresh doubles it

    report = pauselab.evaluate(result.model, train_set, strategy)
    assert len(report.rows) == 8
    assert 0.0 <= report.accuracy <= 1.0

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "ckpt.bin")
        pauselab.save_checkpoint(path, result.model, vocab, '{"origin": "smoke"}')
        model2, vocab2, provenance = pauselab.load_checkpoint(path)
        assert json.loads(provenance) == {"origin": "smoke"}
        assert vocab2.token_list() == vocab.token_list()
        prefix = train_set.examples[0].prefix_ids
        a, lp_a = pauselab.generate(result.model, prefix, 8)
        b, lp_b = pauselab.generate(model2, prefix, 8)
        assert a == b and lp_a == lp_b


def test_grad_check():
    mc = pauselab.ModelConfig()
    mc.num_layers, mc.num_heads, mc.d_model, mc.d_ff = 1, 2, 8, 16
    mc.vocab_size, mc.max_seq_len = 16, 16
    item = pauselab.LossItem()
    item.ids = [pauselab.BOS_ID, 5, 9, pauselab.PAUSE_ID, 12, 7, pauselab.EOS_ID]
    item.loss_lo, item.loss_hi = 1, 6
    item.ignore_set = [2]
    assert pauselab.grad_check(mc, item, samples_per_tensor=4) < 1e-4


def main():
    data, vocab = test_vocab_roundtrip()
    test_inject()
    test_train_and_checkpoint(data, vocab)
    test_grad_check()
    print("python smoke test passed")


if __name__ == "__main__":
    main()
