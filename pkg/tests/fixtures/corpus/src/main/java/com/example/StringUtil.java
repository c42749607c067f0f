package com.example;

/** Small string helpers. */
public final class StringUtil {
    private StringUtil() {
    }

    /** True when the value is null or only whitespace. */
    public static boolean isBlank(String value) {
        return value == null || value.trim().isEmpty();
    }

    /** Reverses the characters of the value. */
    public static String reverse(String value) {
        return new StringBuilder(value).reverse().toString();
    }

    /** Repeats the value {@code times} times. */
    public static String repeat(String value, int times) {
        StringBuilder sb = new StringBuilder();
        for (int i = 0; i < times; i++) {
            sb.append(value);
        }
        return sb.toString();
    }

    public static int countWords(String text) {
        if (isBlank(text)) {
            return 0;
        }
        return text.trim().split("\\s+").length;
    }

    /** Reads the first line of a file. */
    public static String firstLine(java.io.File file) throws java.io.IOException {
        try (java.io.BufferedReader r = new java.io.BufferedReader(new java.io.FileReader(file))) {
            return r.readLine();
        }
    }
}
