FLOAT_FORMAT = "%.17g"

VIEW_FILE = "view_{}.csv"
LABELS_FILE = "labels.csv"
MASK_FILE = "mask.csv"

HISTORY_FILE = "history.csv"
REPORT_FILE = "report.json"
MANIFEST_FILE = "manifest.json"
CHECKPOINT_FILE = "model.pt"
EPOCH_CHECKPOINT_FILE = "model_epoch{:04d}.pt"
EMBEDDINGS_FILE = "embeddings.csv"
PREDICTIONS_FILE = "predicted.csv"
COMPLETED_LATENTS_FILE = "completed_latents_view{}.csv"
LOSS_CURVES_FILE = "loss_curves.svg"
