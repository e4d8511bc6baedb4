"""PPO hyperparameters and network shapes of the reference training setup.

Nothing in this package trains a PPO agent; the greedy lookahead policy
replaces it. These values are kept for anyone wiring in an RL trainer.
"""

GAE_LAMBDA = 0.95
EPOCHS = 10
ROLLOUT_LENGTH = 128
MINIBATCH_SIZE = 4
CLIP_EPS = 0.2
LEARNING_RATE = 1e-4
VALUE_LOSS_COEF = 0.5
ENTROPY_COEF = 0.01
MAX_GRAD_NORM = 0.5
GAMMA = 0.99
TOTAL_TIMESTEPS = 50_000_000

# (channels, height, width) in -> out
CONV_LAYERS = (((31, 31, 3), (16, 15, 15)), ((16, 15, 15), (8, 8, 8)))
ACTOR_LAYERS = (4096, 64, 2)
CRITIC_LAYERS = (3844, 64, 1)
