package com.example.ut;

import com.example.Calculator;
import org.junit.jupiter.api.Test;

import static org.junit.jupiter.api.Assertions.*;

class CalculatorTest {
    @Test
    void storeDoesNotCrash() {
        Calculator c = new Calculator();
        c.store(1);
    }

    @Test
    void constructs() {
        new Calculator();
    }

    @Test
    void printsResult() {
        Calculator c = new Calculator();
        System.out.println(c.add(1, 1));
    }
}
