#!/usr/bin/env python3
"""Trains the small proxy model used by the end-to-end smoke run.

No pretrained checkpoint or GSM8k copy is reachable from the build machine,
so the smoke run uses a stand-in: a 4-layer Llama trained from scratch on
synthetic grade-school word problems written in the GSM8k format, with
chain-of-thought answers that end in "The answer is \\boxed{N}.". Training is
deliberately short so the model gets a fair share of the held-out problems
wrong; the calibration checks need both classes.

Output (default tests/data/proxy/):
  proxy-gsm-llama/  config.json, model.safetensors, tokenizer.json
  gsm8k-test.jsonl  held-out problems, {"question", "answer"} with "#### N"
  train_log.json    loss curve and held-out greedy accuracy

The prompt matches what the harness builds for the "plain-boxed" profile: the
question, a blank line, then the boxed instruction, with no chat template.
"""

import argparse
import json
import math
import pathlib
import random
import time

import torch
from tokenizers import Regex, Tokenizer, decoders, models, pre_tokenizers, trainers
from transformers import LlamaConfig, LlamaForCausalLM

BOXED_INSTRUCTION = "Please reason step by step, and put your final answer within \\boxed{}."
EOS = "<|endoftext|>"
# digits split one by one, so the model can learn column arithmetic
PATTERN = (r"(?i:'s|'t|'re|'ve|'m|'ll|'d)|[^\r\n\p{L}\p{N}]?\p{L}+|\p{N}"
           r"| ?[^\s\p{L}\p{N}]+[\r\n]*|\s*[\r\n]+|\s+(?!\S)|\s+")

NAMES = ["Natalia", "James", "Weng", "Betty", "Julie", "Tom", "Ann", "Mark", "Lily", "Carlos", "Priya", "Ken"]
ITEMS = ["apples", "clips", "pages", "marbles", "cookies", "tickets", "stickers", "pencils", "books", "cards"]
CONTAINERS = ["boxes", "bags", "packs", "crates", "jars"]


def problem(rng: random.Random) -> tuple[str, str, int]:
    """Question, chain-of-thought response and the integer answer."""
    name, item, box = rng.choice(NAMES), rng.choice(ITEMS), rng.choice(CONTAINERS)
    start = rng.randint(5, 60)
    n_box, per_box = rng.randint(2, 9), rng.randint(2, 12)
    bought = n_box * per_box
    total = start + bought
    steps = [f"{name} buys {n_box} * {per_box} = {bought} {item}.",
             f"Now {name} has {start} + {bought} = {total} {item}."]
    q = (f"{name} has {start} {item}. {name} buys {n_box} {box} with {per_box} {item} in each. ")
    kind = rng.randrange(3)
    if kind == 0:
        give = rng.randint(1, total - 1)
        ans = total - give
        q += f"Then {name} gives away {give} {item}. How many {item} does {name} have now?"
        steps.append(f"After giving away {give}, {name} has {total} - {give} = {ans} {item}.")
    elif kind == 1:
        friends = rng.choice([d for d in range(2, 7) if total % d == 0] or [1])
        ans = total // friends
        q += f"{name} shares them equally among {friends} friends. How many {item} does each friend get?"
        steps.append(f"Each friend gets {total} / {friends} = {ans} {item}.")
    else:
        give = rng.randint(1, total - 1)
        left = total - give
        more = rng.randint(2, 40)
        ans = left + more
        q += (f"{name} gives away {give} {item} and later finds {more} more. "
              f"How many {item} does {name} have at the end?")
        steps.append(f"After giving away {give}, {name} has {total} - {give} = {left} {item}.")
        steps.append(f"After finding {more} more, {name} has {left} + {more} = {ans} {item}.")
    response = "\n" + "\n".join(steps) + f"\nThe answer is \\boxed{{{ans}}}."
    return q, response, ans


def prompt_text(question: str) -> str:
    return question + "\n\n" + BOXED_INSTRUCTION


def train_tokenizer(texts: list[str]) -> Tokenizer:
    tok = Tokenizer(models.BPE())
    tok.pre_tokenizer = pre_tokenizers.Sequence([
        pre_tokenizers.Split(Regex(PATTERN), behavior="isolated", invert=False),
        pre_tokenizers.ByteLevel(add_prefix_space=False, use_regex=False),
    ])
    tok.decoder = decoders.ByteLevel()
    trainer = trainers.BpeTrainer(vocab_size=512, special_tokens=[EOS],
                                  initial_alphabet=pre_tokenizers.ByteLevel.alphabet(), show_progress=False)
    tok.train_from_iterator(texts, trainer=trainer)
    return tok


def encode_example(tok: Tokenizer, question: str, response: str, eos: int) -> tuple[list[int], list[int]]:
    p = tok.encode(prompt_text(question)).ids
    r = tok.encode(response).ids + [eos]
    return p + r, [-100] * len(p) + r


def greedy_accuracy(model, tok: Tokenizer, items: list[tuple[str, str, int]], eos: int, limit: int) -> float:
    model.eval()
    correct = 0
    with torch.no_grad():
        for q, _, ans in items[:limit]:
            ids = torch.tensor([tok.encode(prompt_text(q)).ids])
            out = model.generate(ids, max_new_tokens=160, do_sample=False, eos_token_id=eos, pad_token_id=eos)
            text = tok.decode(out[0, ids.shape[1]:].tolist())
            start = text.rfind("\\boxed{")
            end = text.find("}", start)
            correct += start >= 0 and end > start and text[start + 7:end].strip() == str(ans)
    model.train()
    return correct / max(1, min(limit, len(items)))


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "tests/data/proxy"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--train-items", type=int, default=20000)
    ap.add_argument("--test-items", type=int, default=120)
    ap.add_argument("--steps", type=int, default=1500)
    ap.add_argument("--batch", type=int, default=32)
    ap.add_argument("--lr", type=float, default=2e-3)
    args = ap.parse_args()
    torch.manual_seed(args.seed)
    torch.set_num_threads(max(1, torch.get_num_threads()))

    train_rng, test_rng = random.Random(args.seed), random.Random(args.seed + 1_000_003)
    train = [problem(train_rng) for _ in range(args.train_items)]
    seen = {q for q, _, _ in train}
    test = []
    while len(test) < args.test_items:
        item = problem(test_rng)
        if item[0] not in seen:
            test.append(item)

    tok = train_tokenizer([prompt_text(q) + r for q, r, _ in train[:5000]])
    eos = tok.token_to_id(EOS)
    encoded = [encode_example(tok, q, r, eos) for q, r, _ in train]
    max_len = max(len(x) for x, _ in encoded)

    cfg = LlamaConfig(vocab_size=tok.get_vocab_size(), hidden_size=128, intermediate_size=384, num_hidden_layers=4,
                      num_attention_heads=4, num_key_value_heads=4, max_position_embeddings=512,
                      rope_theta=10000.0, rms_norm_eps=1e-5, tie_word_embeddings=True, eos_token_id=eos,
                      bos_token_id=eos, attn_implementation="eager")
    model = LlamaForCausalLM(cfg)
    opt = torch.optim.AdamW(model.parameters(), lr=args.lr, weight_decay=0.01)
    warmup = 100
    sched = torch.optim.lr_scheduler.LambdaLR(
        opt, lambda s: min(1.0, (s + 1) / warmup) * 0.5 * (1 + math.cos(math.pi * min(1.0, s / args.steps))))

    log = {"max_len": max_len, "vocab": tok.get_vocab_size(), "losses": []}
    order = list(range(len(encoded)))
    shuffle = random.Random(args.seed + 7)
    shuffle.shuffle(order)
    cursor, t0 = 0, time.time()
    model.train()
    for step in range(args.steps):
        batch = []
        for _ in range(args.batch):
            if cursor == len(order):
                shuffle.shuffle(order)
                cursor = 0
            batch.append(encoded[order[cursor]])
            cursor += 1
        width = max(len(x) for x, _ in batch)
        ids = torch.full((len(batch), width), eos)
        labels = torch.full((len(batch), width), -100)
        mask = torch.zeros((len(batch), width), dtype=torch.long)
        for i, (x, y) in enumerate(batch):
            ids[i, :len(x)] = torch.tensor(x)
            labels[i, :len(y)] = torch.tensor(y)
            mask[i, :len(x)] = 1
        loss = model(input_ids=ids, attention_mask=mask, labels=labels).loss
        opt.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(model.parameters(), 1.0)
        opt.step()
        sched.step()
        if step % 50 == 0 or step == args.steps - 1:
            log["losses"].append([step, round(loss.item(), 4)])
            print(f"step {step} loss {loss.item():.4f} ({time.time() - t0:.0f}s)", flush=True)

    acc = greedy_accuracy(model, tok, test, eos, len(test))
    log["heldout_greedy_accuracy"] = acc
    log["train_seconds"] = round(time.time() - t0, 1)
    print(f"held-out greedy accuracy {acc:.3f}")

    root = pathlib.Path(args.out)
    mdir = root / "proxy-gsm-llama"
    mdir.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(mdir)
    tok.save(str(mdir / "tokenizer.json"))
    with open(root / "gsm8k-test.jsonl", "w") as f:
        for q, r, ans in test:
            cot = r.strip().rsplit("\n", 1)[0]
            f.write(json.dumps({"question": q, "answer": f"{cot}\n#### {ans}"}) + "\n")
    (root / "train_log.json").write_text(json.dumps(log, indent=1))
    print("wrote", root)


if __name__ == "__main__":
    main()
