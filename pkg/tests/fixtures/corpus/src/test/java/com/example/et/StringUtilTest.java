package com.example.et;

import com.example.StringUtil;
import org.junit.jupiter.api.Test;

import static org.junit.jupiter.api.Assertions.*;

class StringUtilTest {
    @Test
    void countsWords() {
        // TODO: cover punctuation
    }

    @Test
    void repeats() {
        /* assertEquals("abab", StringUtil.repeat("ab", 2)); */
    }
}
