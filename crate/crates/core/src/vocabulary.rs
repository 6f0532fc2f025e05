/// Common English words used as the default fixture vocabulary.
pub const DEFAULT_VOCABULARY: &[&str] = &[
    "the", "of", "and", "to", "a", "in", "is", "that", "for", "it", "as", "was", "with", "be",
    "by", "on", "not", "he", "she", "they", "we", "you", "this", "are", "or", "his", "from",
    "at", "which", "but", "have", "an", "had", "her", "were", "their", "one", "all", "been",
    "has", "there", "when", "who", "more", "if", "will", "would", "no", "so", "what", "out",
    "up", "said", "into", "than", "its", "about", "can", "them", "only", "other", "time",
    "new", "some", "could", "these", "two", "may", "first", "then", "do", "any", "like", "my",
    "now", "over", "such", "our", "man", "me", "even", "most", "made", "after", "also", "did",
    "many", "before", "must", "through", "back", "years", "where", "much", "your", "way",
    "down", "should", "because", "each", "just", "those", "people", "how", "too", "little",
    "state", "good", "very", "make", "world", "still", "own", "see", "men", "work", "long",
    "get", "here", "between", "both", "life", "being", "under", "never", "day", "same",
    "another", "know", "while", "last", "might", "us", "great", "old", "year", "off", "come",
    "since", "against", "go", "came", "right", "used", "take", "three", "dream", "sleep",
    "hello", "hola", "happy", "sad", "apple", "fruit", "company", "river", "bank", "money",
    "music", "movie", "film", "star", "game", "play", "house", "city", "country", "water",
    "fire", "earth", "light", "dark", "night", "morning", "evening", "code", "data", "model",
    "neuron", "token", "graph", "search", "query", "layer", "network", "red", "blue", "green",
    "yellow", "black", "white", "small", "large", "high", "low", "open", "close", "begin",
    "end", "left", "north", "south", "east", "west", "king", "queen", "child", "mother",
    "father", "brother", "sister", "school", "book", "paper", "table", "chair", "door",
    "window", "road", "car", "train", "ship", "plane", "bird", "fish", "dog", "cat", "horse",
    "tree", "flower", "grass", "stone", "gold", "silver", "iron",
];
